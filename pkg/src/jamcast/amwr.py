"""Adaptive moving window regression baseline.

A Lomb-Scargle periodogram of the jam-factor history sizes the training
window; an SVR trained on the trailing window forecasts the next prediction
window, whose length grows when forecast accuracy exceeds the high threshold
and shrinks below the low threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import (
    DomainError,
    InsufficientDataError,
    NoDominantPeriodError,
    ShapeError,
    ValidationError,
)
from .featureset import SECONDS_PER_DAY, TrafficObservation, encode_matrix, fit_scaler_matrix
from .svr import SvrHyperparams, train_svr

FALLBACK_TRAINING_WINDOW = SECONDS_PER_DAY
MIN_TRAINING_WINDOW = 3600
GRID_POINTS = 1000


@dataclass(frozen=True, eq=False)
class Periodogram:
    frequencies: np.ndarray  # Hz
    powers: np.ndarray

    def __post_init__(self):
        f = np.array(self.frequencies, dtype=float)
        p = np.array(self.powers, dtype=float)
        if f.shape != p.shape or f.ndim != 1:
            raise ShapeError("frequencies and powers must be 1-D and equally long")
        if np.any(np.diff(f) <= 0):
            raise ValidationError("frequencies must be strictly increasing", field="frequencies")
        if np.any(p < 0):
            raise ValidationError("powers must be non-negative", field="powers")
        f.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "powers", p)


@dataclass(frozen=True)
class WindowController:
    training_window: float = FALLBACK_TRAINING_WINDOW
    prediction_window: float = 900.0
    low_threshold: float = 0.80
    high_threshold: float = 0.95
    min_prediction_window: float = 900.0
    max_prediction_window: float = float(SECONDS_PER_DAY)
    growth_factor: float = 2.0

    def __post_init__(self):
        if not 0 < self.low_threshold < self.high_threshold < 1:
            raise ValidationError("thresholds must satisfy 0 < low < high < 1")
        if not 0 < self.min_prediction_window <= self.prediction_window <= self.max_prediction_window:
            raise ValidationError("prediction_window must lie within [min, max]")
        if not self.growth_factor > 1:
            raise ValidationError("growth_factor must be > 1", field="growth_factor")
        if not self.training_window > 0:
            raise ValidationError("training_window must be > 0", field="training_window")


def lomb_scargle(times, values, frequencies) -> Periodogram:
    """Normalized Lomb periodogram with the time-offset ``tau`` at every frequency.

    Power is the sum of the two least-squares quadrature fits divided by twice
    the sample variance (``ddof=1``).  Zero-variance input gives zero power.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    f = np.asarray(frequencies, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ShapeError(f"times and values differ in shape: {t.shape} vs {y.shape}")
    if t.size < 4:
        raise InsufficientDataError("need at least 4 samples for a periodogram")
    if np.any(np.diff(t) <= 0):
        raise ValidationError("times must be strictly increasing", field="times")
    if np.any(f <= 0):
        raise DomainError("frequencies must be positive")
    resid = y - y.mean()
    var = float(resid @ resid) / (y.size - 1)
    if var <= 0.0:
        return Periodogram(f, np.zeros_like(f))

    t = t - t[0]
    w = 2.0 * np.pi * f[:, None]
    wt = w * t[None, :]
    tau = np.arctan2(np.sin(2.0 * wt).sum(axis=1), np.cos(2.0 * wt).sum(axis=1)) / (2.0 * w[:, 0])
    arg = wt - (w[:, 0] * tau)[:, None]
    c, s = np.cos(arg), np.sin(arg)
    cc = (c * c).sum(axis=1)
    ss = (s * s).sum(axis=1)
    yc = c @ resid
    ys = s @ resid
    # a quadrature term with a vanishing denominator carries no power
    with np.errstate(divide="ignore", invalid="ignore"):
        pc = np.where(cc > 1e-12 * t.size, yc * yc / cc, 0.0)
        ps = np.where(ss > 1e-12 * t.size, ys * ys / ss, 0.0)
    power = np.maximum((pc + ps) / (2.0 * var), 0.0)
    return Periodogram(f, power)


def frequency_grid(times, points: int = GRID_POINTS) -> np.ndarray:
    """Log-spaced grid from one cycle per span up to half the median sampling rate."""
    t = np.asarray(times, dtype=float)
    if t.size < 2:
        raise InsufficientDataError("need at least 2 timestamps for a frequency grid")
    span = t[-1] - t[0]
    dt = float(np.median(np.diff(t)))
    lo, hi = 1.0 / span, 1.0 / (2.0 * dt)
    if not lo < hi:
        raise InsufficientDataError("series too short for a frequency grid")
    return np.geomspace(lo, hi, points)


def dominant_period(pg: Periodogram) -> float:
    if pg.powers.size == 0 or not np.any(pg.powers > 0):
        raise NoDominantPeriodError("periodogram has no positive power")
    # argmax returns the first maximum, i.e. the lowest frequency
    return 1.0 / float(pg.frequencies[int(np.argmax(pg.powers))])


def adapt_prediction_window(ctrl: WindowController, accuracy: float) -> WindowController:
    if not 0.0 <= accuracy <= 1.0:
        raise DomainError(f"accuracy must lie in [0, 1], got {accuracy}")
    if accuracy > ctrl.high_threshold:
        window = min(ctrl.prediction_window * ctrl.growth_factor, ctrl.max_prediction_window)
    elif accuracy < ctrl.low_threshold:
        window = max(ctrl.prediction_window / ctrl.growth_factor, ctrl.min_prediction_window)
    else:
        return ctrl
    return replace(ctrl, prediction_window=window)


def accuracy_score(actual, predicted) -> float:
    """``1 - MAE / max(mean|actual|, 1)``, clamped to [0, 1]."""
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape or a.ndim != 1:
        raise ShapeError("actual and predicted must be equally long 1-D sequences")
    if a.size == 0:
        raise ShapeError("accuracy of an empty forecast is undefined")
    mae = float(np.abs(a - p).mean())
    denom = max(float(np.abs(a).mean()), 1.0)
    return min(max(1.0 - mae / denom, 0.0), 1.0)


@dataclass(frozen=True)
class SpanRecord:
    start: int
    prediction_window: float
    n_points: int
    accuracy: float


@dataclass(frozen=True)
class AmwrRun:
    points: list  # (timestamp, predicted, actual)
    training_window: float
    spans: list = field(default_factory=list)
    final_controller: WindowController | None = None


def initial_training_window(times, values) -> float:
    """Dominant period of the history, or one day when there is none."""
    try:
        pg = lomb_scargle(times, values, frequency_grid(times))
        return dominant_period(pg)
    except NoDominantPeriodError:
        return float(FALLBACK_TRAINING_WINDOW)


def run_amwr(
    series: Sequence[TrafficObservation],
    controller: WindowController | None = None,
    hp: SvrHyperparams | None = None,
    seed: int = 0,
    forecast_start: int | None = None,
    warmup: int = 3 * SECONDS_PER_DAY,
) -> AmwrRun:
    """Rolling AMWR forecasts for one road.

    Forecasting starts at ``forecast_start`` (default: ``warmup`` seconds
    after the first observation).  Everything earlier is history used to size
    the training window.  Each span retrains on the trailing training window,
    forecasts every observation inside the span, then adapts the window.
    """
    ctrl = controller or WindowController()
    rows = sorted(series, key=lambda o: o.timestamp)
    if len({o.road_id for o in rows}) > 1:
        raise ValidationError("run_amwr expects the series of a single road")
    if len(rows) < 4:
        raise InsufficientDataError("series too short for AMWR")
    ts = np.array([o.timestamp for o in rows], dtype=np.int64)
    X_all, y_all = encode_matrix(rows)
    if forecast_start is None:
        forecast_start = int(ts[0]) + warmup
    first = int(np.searchsorted(ts, forecast_start, side="left"))
    if first < 4 or first >= len(rows):
        raise InsufficientDataError("series does not cover a warmup history and a forecast span")

    history_span = float(ts[first - 1] - ts[0])
    window = initial_training_window(ts[:first], y_all[:first])
    window = min(max(window, MIN_TRAINING_WINDOW), history_span)
    if window < MIN_TRAINING_WINDOW:
        raise InsufficientDataError(
            f"history of {history_span:.0f} s is shorter than the minimum training window"
        )
    ctrl = replace(ctrl, training_window=window)

    points, spans = [], []
    pos = first
    while pos < len(rows):
        t0 = int(ts[pos])
        lo = int(np.searchsorted(ts, t0 - ctrl.training_window, side="left"))
        hi = int(np.searchsorted(ts, t0 + ctrl.prediction_window, side="left"))
        if pos - lo < 2:
            raise InsufficientDataError(f"fewer than 2 training rows before t={t0}")
        scaler = fit_scaler_matrix(X_all[lo:pos])
        model = train_svr((scaler.transform(X_all[lo:pos]), y_all[lo:pos]), hp, seed)
        pred = np.clip(model.decision_function(scaler.transform(X_all[pos:hi])), 0.0, 10.0)
        actual = y_all[pos:hi]
        acc = accuracy_score(actual, pred)
        spans.append(SpanRecord(t0, ctrl.prediction_window, hi - pos, acc))
        points.extend(zip(ts[pos:hi].tolist(), pred.tolist(), actual.tolist()))
        ctrl = adapt_prediction_window(ctrl, acc)
        pos = hi
    return AmwrRun(points, window, spans, ctrl)
