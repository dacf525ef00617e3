"""RMSE, per-road reports, the proposed-vs-baseline comparison and naive yardsticks."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InsufficientDataError, ShapeError, ValidationError
from .featureset import TrafficObservation

AVERAGE_ROW = "AVERAGE"
WEEK_SECONDS = 7 * 86400


@dataclass(frozen=True)
class EvaluationSeries:
    actual: tuple
    predicted: tuple

    def __post_init__(self):
        object.__setattr__(self, "actual", tuple(float(v) for v in self.actual))
        object.__setattr__(self, "predicted", tuple(float(v) for v in self.predicted))
        if len(self.actual) != len(self.predicted):
            raise ShapeError(
                f"actual and predicted differ in length ({len(self.actual)} vs {len(self.predicted)})"
            )
        if not self.actual:
            raise ShapeError("an evaluation series needs at least one pair")

    @property
    def n(self) -> int:
        return len(self.actual)


@dataclass(frozen=True)
class ForecastSeries:
    """Paired (timestamp, predicted, actual) jam factors for one road."""

    road_id: str
    points: tuple = field(default_factory=tuple)

    def __post_init__(self):
        pts = tuple((int(t), float(p), float(a)) for t, p, a in self.points)
        for k, (t, p, a) in enumerate(pts):
            if k and t <= pts[k - 1][0]:
                raise ValidationError("forecast timestamps must be strictly increasing")
            if not (0.0 <= p <= 10.0 and 0.0 <= a <= 10.0):
                raise ValidationError(f"jam factors must lie in [0, 10] at t={t}")
        object.__setattr__(self, "points", pts)

    @property
    def timestamps(self) -> list[int]:
        return [t for t, _, _ in self.points]

    @property
    def predicted(self) -> list[float]:
        return [p for _, p, _ in self.points]

    @property
    def actual(self) -> list[float]:
        return [a for _, _, a in self.points]

    def as_series(self) -> EvaluationSeries:
        return EvaluationSeries(self.actual, self.predicted)


@dataclass(frozen=True)
class EvaluationReport:
    per_road: Mapping[str, float]
    average_rmse: float
    method_label: str


def rmse(series: EvaluationSeries) -> float:
    if series.n == 0:
        raise ShapeError("empty series")
    a = np.asarray(series.actual)
    p = np.asarray(series.predicted)
    return math.sqrt(float(np.mean((a - p) ** 2)))


def build_report(forecasts: Sequence, label: str) -> EvaluationReport:
    """Per-road RMSE and their unweighted mean.

    Accepts :class:`ForecastSeries` objects or a ``{road_id: rmse}`` mapping
    of precomputed values.
    """
    if isinstance(forecasts, Mapping):
        per_road = {str(k): float(v) for k, v in forecasts.items()}
    else:
        per_road = {}
        for fc in forecasts:
            if fc.road_id in per_road:
                raise ValidationError(f"duplicate road {fc.road_id!r} in report input")
            per_road[fc.road_id] = rmse(fc.as_series())
    if not per_road:
        raise ShapeError("a report needs at least one road")
    average = math.fsum(per_road.values()) / len(per_road)
    return EvaluationReport(dict(sorted(per_road.items())), average, label)


def compare_reports(proposed: EvaluationReport, baseline: EvaluationReport) -> list[tuple[str, float, float]]:
    """Table rows ``(road_id, proposed_rmse, baseline_rmse)`` plus a final average row."""
    a, b = set(proposed.per_road), set(baseline.per_road)
    if a != b:
        raise ValidationError(
            f"road sets differ: only in {proposed.method_label}: {sorted(a - b)}; "
            f"only in {baseline.method_label}: {sorted(b - a)}"
        )
    rows = [(road, proposed.per_road[road], baseline.per_road[road]) for road in sorted(a)]
    rows.append((AVERAGE_ROW, proposed.average_rmse, baseline.average_rmse))
    return rows


def naive_baselines(
    test_set: Sequence[TrafficObservation],
    train_set: Sequence[TrafficObservation],
    road_id: str,
) -> dict[str, ForecastSeries]:
    """Persistence (same weekday/time one week earlier) and training-mean forecasts."""
    train = {o.timestamp: o.jam_factor for o in train_set if o.road_id == road_id}
    test = sorted((o for o in test_set if o.road_id == road_id), key=lambda o: o.timestamp)
    if not train or not test:
        raise InsufficientDataError(f"road {road_id!r} missing from the train or test set")
    mean = math.fsum(train.values()) / len(train)
    persistence, flat = [], []
    for o in test:
        prior = train.get(o.timestamp - WEEK_SECONDS)
        if prior is None:
            raise InsufficientDataError(
                f"road {road_id!r}: no training slot one week before t={o.timestamp}"
            )
        persistence.append((o.timestamp, prior, o.jam_factor))
        flat.append((o.timestamp, mean, o.jam_factor))
    return {
        "persistence_last_week": ForecastSeries(road_id, persistence),
        "global_mean": ForecastSeries(road_id, flat),
    }


def write_report_csv(reports: Iterable[EvaluationReport], path) -> None:
    """Rows ``road_id,method,rmse``; each method ends with its average row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["road_id", "method", "rmse"])
        for rep in reports:
            for road, value in rep.per_road.items():
                w.writerow([road, rep.method_label, repr(value)])
            w.writerow([AVERAGE_ROW, rep.method_label, repr(rep.average_rmse)])


def write_comparison_csv(rows, path, proposed_label="proposed", baseline_label="amwr") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["road_id", f"{proposed_label}_rmse", f"{baseline_label}_rmse"])
        for road, p, b in rows:
            w.writerow([road, repr(p), repr(b)])


def write_forecast_csv(series: ForecastSeries, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "predicted", "actual"])
        for t, p, a in series.points:
            w.writerow([t, repr(p), repr(a)])
