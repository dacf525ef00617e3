"""Observation schema and numeric feature encoding.

Feature layout (a compatibility contract recorded in every model file)::

    [time_sin, time_cos, day_sin, day_cos, temperature_c, daylight,
     humidity_pct, wind_speed_kmh, speed_ratio]

Time of day and weekday are taken from the UTC timestamp; Monday is day 0.
Road identity is not a feature: one model is trained per road.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError, ShapeError, ValidationError

SECONDS_PER_DAY = 86400
SLOT_SECONDS = 300

FEATURE_NAMES = (
    "time_sin",
    "time_cos",
    "day_sin",
    "day_cos",
    "temperature_c",
    "daylight",
    "humidity_pct",
    "wind_speed_kmh",
    "speed_ratio",
)
FEATURE_LAYOUT_TAG = "jamcast-v1:" + ",".join(FEATURE_NAMES)
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class TrafficObservation:
    """One timestamped per-road record joining traffic state and weather."""

    timestamp: int
    road_id: str
    temperature_c: float
    daylight: bool
    humidity_pct: float
    wind_speed_kmh: float
    speed_ratio: float
    jam_factor: float

    def __post_init__(self):
        validate_observation(self)


def validate_observation(obs: TrafficObservation) -> None:
    def bad(field, why):
        raise ValidationError(f"{field}={getattr(obs, field)!r}: {why}", field=field)

    for name in ("temperature_c", "humidity_pct", "wind_speed_kmh", "speed_ratio", "jam_factor"):
        if not math.isfinite(getattr(obs, name)):
            bad(name, "must be finite")
    if not obs.timestamp > 0:
        bad("timestamp", "must be strictly positive")
    if not 0.0 <= obs.jam_factor <= 10.0:
        bad("jam_factor", "must lie in [0, 10]")
    if not 0.0 <= obs.humidity_pct <= 100.0:
        bad("humidity_pct", "must lie in [0, 100]")
    if obs.wind_speed_kmh < 0:
        bad("wind_speed_kmh", "must be >= 0")
    if obs.speed_ratio < 0:
        bad("speed_ratio", "must be >= 0")
    if not obs.road_id:
        bad("road_id", "must be non-empty")


@dataclass(frozen=True, eq=False)
class EncodedSample:
    features: np.ndarray
    target: float

    def __post_init__(self):
        feats = np.array(self.features, dtype=float)
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "target", float(self.target))


@dataclass(frozen=True, eq=False)
class ScalerParams:
    """Per-feature z-score parameters fitted on training rows only."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        scale = np.array(self.scale, dtype=float)
        if mean.shape != scale.shape or mean.ndim != 1:
            raise ShapeError("mean and scale must be 1-D vectors of equal length")
        if not np.all(scale > 0):
            raise ValidationError("scale must be > 0 for every feature", field="scale")
        mean.setflags(write=False)
        scale.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dim:
            raise ShapeError(f"expected {self.dim} features, got {X.shape[-1]}")
        return (X - self.mean) / self.scale

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        if Z.shape[-1] != self.dim:
            raise ShapeError(f"expected {self.dim} features, got {Z.shape[-1]}")
        return Z * self.scale + self.mean


def encode_time_of_day(seconds_since_midnight: int) -> tuple[float, float]:
    t = seconds_since_midnight
    if not 0 <= t < SECONDS_PER_DAY:
        raise DomainError(f"seconds since midnight must be in [0, 86400), got {t}")
    phase = 2.0 * math.pi * t / SECONDS_PER_DAY
    return math.sin(phase), math.cos(phase)


def encode_day_of_week(day_index: int) -> tuple[float, float]:
    if day_index not in range(7):
        raise DomainError(f"day index must be in 0..6 (Monday = 0), got {day_index}")
    phase = 2.0 * math.pi * day_index / 7
    return math.sin(phase), math.cos(phase)


def utc_slot(timestamp: int) -> tuple[int, int]:
    """Return ``(seconds_since_midnight, weekday)`` for a UTC epoch timestamp."""
    dt = datetime.fromtimestamp(timestamp, tz=timezone.utc)
    return timestamp % SECONDS_PER_DAY, dt.weekday()


def feature_vector(obs: TrafficObservation) -> list[float]:
    seconds, weekday = utc_slot(obs.timestamp)
    ts, tc = encode_time_of_day(seconds)
    ds, dc = encode_day_of_week(weekday)
    return [
        ts,
        tc,
        ds,
        dc,
        float(obs.temperature_c),
        1.0 if obs.daylight else 0.0,
        float(obs.humidity_pct),
        float(obs.wind_speed_kmh),
        float(obs.speed_ratio),
    ]


def encode_observation(obs: TrafficObservation) -> EncodedSample:
    validate_observation(obs)
    return EncodedSample(feature_vector(obs), obs.jam_factor)


def encode_matrix(observations: Sequence[TrafficObservation]) -> tuple[np.ndarray, np.ndarray]:
    """Stack encoded observations into ``(X, y)`` arrays."""
    X = np.array([feature_vector(o) for o in observations], dtype=float).reshape(-1, N_FEATURES)
    y = np.array([o.jam_factor for o in observations], dtype=float)
    return X, y


def fit_scaler(samples: Sequence[EncodedSample]) -> ScalerParams:
    if len(samples) < 2:
        raise InsufficientDataError(f"need at least 2 samples to fit a scaler, got {len(samples)}")
    return fit_scaler_matrix(np.stack([s.features for s in samples]))


def fit_scaler_matrix(X: np.ndarray) -> ScalerParams:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InsufficientDataError("need at least 2 rows to fit a scaler")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std < 1e-12, 1.0, std)
    return ScalerParams(mean, scale)


def apply_scaler(params: ScalerParams, sample: EncodedSample) -> EncodedSample:
    if sample.features.shape != (params.dim,):
        raise ShapeError(f"expected {params.dim} features, got {sample.features.shape[0]}")
    return EncodedSample(params.transform(sample.features), sample.target)
