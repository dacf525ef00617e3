"""Week split, per-road training, week-ahead forecasting and the full experiment."""
from __future__ import annotations

import itertools
import logging
import math
import sys
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Iterable, Sequence

import numpy as np

from . import evaluation
from .amwr import AmwrRun, WindowController, run_amwr
from .errors import (
    InsufficientDataError,
    JamcastError,
    ParseError,
    SearchFailedError,
    ShapeError,
    ValidationError,
)
from .evaluation import EvaluationReport, ForecastSeries, build_report, naive_baselines
from .featureset import (
    FEATURE_LAYOUT_TAG,
    SECONDS_PER_DAY,
    SLOT_SECONDS,
    TrafficObservation,
    encode_matrix,
    fit_scaler_matrix,
)
from .svr import SvrHyperparams, SvrModel, train_svr

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

WEEK = 7 * SECONDS_PER_DAY
MIN_TRAINING_ROWS = 100
MAX_FILLED_SLOTS = 3


def _day_start(d: str | date) -> int:
    if isinstance(d, str):
        d = date.fromisoformat(d)
    return int(datetime(d.year, d.month, d.day, tzinfo=timezone.utc).timestamp())


@dataclass(frozen=True)
class WeekSplit:
    """Day-start UTC timestamps; ``*_end`` names the last day included."""

    train_start: int
    train_end: int
    test_start: int
    test_end: int

    def __post_init__(self):
        if self.train_end + SECONDS_PER_DAY > self.test_start:
            raise ValidationError("the training week must end before the test week starts")
        for a, b in ((self.train_start, self.train_end), (self.test_start, self.test_end)):
            if b + SECONDS_PER_DAY - a != WEEK:
                raise ValidationError("each span must cover exactly 7 days")

    @classmethod
    def from_dates(cls, train_start, train_end, test_start, test_end) -> "WeekSplit":
        return cls(*(_day_start(d) for d in (train_start, train_end, test_start, test_end)))

    @classmethod
    def consecutive(cls, train_start) -> "WeekSplit":
        t0 = _day_start(train_start)
        return cls(t0, t0 + 6 * SECONDS_PER_DAY, t0 + WEEK, t0 + WEEK + 6 * SECONDS_PER_DAY)

    @property
    def train_interval(self) -> tuple[int, int]:
        return self.train_start, self.train_end + SECONDS_PER_DAY

    @property
    def test_interval(self) -> tuple[int, int]:
        return self.test_start, self.test_end + SECONDS_PER_DAY


# the evaluation protocol's weeks: 15-21 April 2019 train, 22-28 April test
DEFAULT_SPLIT = WeekSplit.from_dates("2019-04-15", "2019-04-21", "2019-04-22", "2019-04-28")


def split_weeks(dataset: Iterable[TrafficObservation], split: WeekSplit):
    (a0, a1), (b0, b1) = split.train_interval, split.test_interval
    train, test = [], []
    for o in dataset:
        if a0 <= o.timestamp < a1:
            train.append(o)
        elif b0 <= o.timestamp < b1:
            test.append(o)
    if not train:
        raise InsufficientDataError("no observations fall inside the training week")
    if not test:
        raise InsufficientDataError("no observations fall inside the test week")
    return train, test


def fill_gaps(
    rows: Iterable[TrafficObservation],
    slot: int = SLOT_SECONDS,
    max_fill: int = MAX_FILLED_SLOTS,
) -> list[TrafficObservation]:
    """Forward-fill runs of up to ``max_fill`` missing slots per road.

    Longer gaps are left empty.  Output is ordered by (timestamp, road_id).
    """
    by_road: dict[str, list[TrafficObservation]] = {}
    for o in rows:
        by_road.setdefault(o.road_id, []).append(o)
    out = []
    for series in by_road.values():
        series.sort(key=lambda o: o.timestamp)
        prev = None
        for o in series:
            if prev is not None:
                missing = (o.timestamp - prev.timestamp) // slot - 1
                if 0 < missing <= max_fill:
                    for k in range(1, missing + 1):
                        out.append(_shifted(prev, prev.timestamp + k * slot))
            out.append(o)
            prev = o
    out.sort(key=lambda o: (o.timestamp, o.road_id))
    return out


def _shifted(o: TrafficObservation, timestamp: int) -> TrafficObservation:
    return TrafficObservation(
        timestamp, o.road_id, o.temperature_c, o.daylight, o.humidity_pct,
        o.wind_speed_kmh, o.speed_ratio, o.jam_factor,
    )


def road_rows(rows: Iterable[TrafficObservation], road_id: str) -> list[TrafficObservation]:
    return sorted((o for o in rows if o.road_id == road_id), key=lambda o: o.timestamp)


def train_road_model(
    train_set: Sequence[TrafficObservation],
    road_id: str,
    hp: SvrHyperparams | None = None,
    seed: int = 0,
    min_rows: int = MIN_TRAINING_ROWS,
) -> SvrModel:
    """Fit the scaler and the SVR on one road's training rows."""
    rows = road_rows(train_set, road_id)
    if len(rows) < min_rows:
        raise InsufficientDataError(
            f"road {road_id!r}: {len(rows)} training rows, need at least {min_rows}"
        )
    X, y = encode_matrix(rows)
    scaler = fit_scaler_matrix(X)
    return train_svr((scaler.transform(X), y), hp, seed, scaler=scaler)


def forecast_week(model: SvrModel, test_rows: Sequence[TrafficObservation]) -> ForecastSeries:
    """Clamp-to-[0, 10] predictions for every test row, paired with the actuals."""
    if model.feature_layout_tag != FEATURE_LAYOUT_TAG:
        raise ShapeError(f"model feature layout {model.feature_layout_tag!r} is not {FEATURE_LAYOUT_TAG!r}")
    roads = {o.road_id for o in test_rows}
    if len(roads) != 1:
        raise ValidationError(f"forecast_week needs rows of exactly one road, got {sorted(roads)}")
    rows = sorted(test_rows, key=lambda o: o.timestamp)
    X, y = encode_matrix(rows)
    if model.scaler is not None:
        X = model.scaler.transform(X)
    pred = np.clip(model.decision_function(X), 0.0, 10.0)
    return ForecastSeries(rows[0].road_id, zip((o.timestamp for o in rows), pred.tolist(), y.tolist()))


def load_grid(path) -> list[SvrHyperparams]:
    """Cartesian product of the lists in a TOML grid file, in file order.

    Recognized keys: ``C``, ``epsilon``, ``gamma``, ``tol``, ``max_passes``;
    scalars are treated as one-element lists.
    """
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ParseError(f"cannot read grid {path}: {exc}") from None
    allowed = ("C", "epsilon", "gamma", "tol", "max_passes")
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ParseError(f"unknown grid keys {sorted(unknown)}")
    keys = [k for k in allowed if k in doc]
    values = [doc[k] if isinstance(doc[k], list) else [doc[k]] for k in keys]
    try:
        return [SvrHyperparams(**dict(zip(keys, combo))) for combo in itertools.product(*values)]
    except (TypeError, ValueError) as exc:
        raise ParseError(f"invalid grid point: {exc}") from None


def evaluate_grid(train_set, road_id, grid, seed=0) -> list[tuple[SvrHyperparams, float | None]]:
    """Validation RMSE of every grid point: fit on days 1-6, validate on day 7.

    A grid point that fails to train scores ``None``.
    """
    rows = road_rows(train_set, road_id)
    if not rows:
        raise InsufficientDataError(f"road {road_id!r} absent from the training set")
    day0 = rows[0].timestamp - rows[0].timestamp % SECONDS_PER_DAY
    cut = day0 + 6 * SECONDS_PER_DAY
    fit = [o for o in rows if o.timestamp < cut]
    val = [o for o in rows if o.timestamp >= cut]
    if not val:
        raise InsufficientDataError(f"road {road_id!r}: no validation rows on day 7")
    scores = []
    for hp in grid:
        try:
            model = train_road_model(fit, road_id, hp, seed)
        except JamcastError as exc:
            log.info("grid point %s failed: %s", hp, exc)
            scores.append((hp, None))
            continue
        scores.append((hp, evaluation.rmse(forecast_week(model, val).as_series())))
    return scores


def grid_search(train_set, road_id, grid: Sequence[SvrHyperparams], seed: int = 0) -> SvrHyperparams:
    if not grid:
        raise SearchFailedError("empty hyperparameter grid")
    best, best_score = None, math.inf
    for hp, score in evaluate_grid(train_set, road_id, grid, seed):
        if score is not None and score < best_score:
            best, best_score = hp, score
    if best is None:
        raise SearchFailedError(f"road {road_id!r}: every grid point failed to train")
    return best


@dataclass
class RoadResult:
    road_id: str
    hyperparams: SvrHyperparams
    model: SvrModel
    forecast: ForecastSeries
    amwr: AmwrRun
    amwr_forecast: ForecastSeries
    baselines: dict = field(default_factory=dict)


@dataclass
class ExperimentResult:
    split: WeekSplit
    roads: list[RoadResult]
    proposed: EvaluationReport
    baseline: EvaluationReport

    def comparison(self):
        return evaluation.compare_reports(self.proposed, self.baseline)


def select_roads(dataset: Iterable[TrafficObservation], k: int, seed: int) -> list[str]:
    """Seeded random choice of ``k`` distinct roads, returned sorted."""
    import random

    ids = sorted({o.road_id for o in dataset})
    if k > len(ids):
        raise InsufficientDataError(f"asked for {k} roads, dataset has {len(ids)}")
    return sorted(random.Random(seed).sample(ids, k))


def run_road(
    dataset, split: WeekSplit, road_id: str, hp=None, grid=None, seed: int = 0,
    controller: WindowController | None = None,
) -> RoadResult:
    train, test = split_weeks(dataset, split)
    if grid:
        hp = grid_search(train, road_id, grid, seed)
    hp = hp or SvrHyperparams()
    test_rows = road_rows(test, road_id)
    if not test_rows:
        raise InsufficientDataError(f"road {road_id!r} absent from the test week")
    try:
        model = train_road_model(train, road_id, hp, seed)
    except JamcastError as exc:
        exc.road_id = road_id
        raise
    forecast = forecast_week(model, test_rows)
    amwr = run_amwr(
        road_rows(train, road_id) + test_rows, controller, hp, seed, forecast_start=split.test_start
    )
    amwr_forecast = ForecastSeries(road_id, amwr.points)
    baselines = naive_baselines(test, train, road_id)
    return RoadResult(road_id, model.hyperparams, model, forecast, amwr, amwr_forecast, baselines)


def run_experiment(
    dataset: Sequence[TrafficObservation],
    split: WeekSplit,
    roads: Sequence[str],
    hp: SvrHyperparams | None = None,
    grid: Sequence[SvrHyperparams] | None = None,
    seed: int = 0,
    controller: WindowController | None = None,
) -> ExperimentResult:
    dataset = fill_gaps(dataset)
    results = []
    for road in roads:
        try:
            results.append(run_road(dataset, split, road, hp, grid, seed, controller))
        except JamcastError as exc:
            if not hasattr(exc, "road_id"):
                exc.road_id = road
            raise
    proposed = build_report([r.forecast for r in results], "proposed")
    baseline = build_report([r.amwr_forecast for r in results], "amwr")
    return ExperimentResult(split, results, proposed, baseline)
