"""Data collection, CSV persistence and the synthetic dataset generator.

Provider payloads follow a minimal documented JSON schema::

    traffic: {"roads": [{"road_id": str, "jam_factor": num,
                         "current_speed": num, "freeflow_speed": num}, ...]}
    weather: {"temperature_c": num, "humidity_pct": num,
              "wind_speed_kmh": num, "daylight": bool}

Dataset CSV columns, in this exact order::

    timestamp,road_id,temperature_c,daylight,humidity_pct,wind_speed_kmh,speed_ratio,jam_factor
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import sys
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .errors import DomainError, IngestionError, ParseError, ValidationError
from .featureset import SECONDS_PER_DAY, SLOT_SECONDS, TrafficObservation

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

CSV_HEADER = (
    "timestamp",
    "road_id",
    "temperature_c",
    "daylight",
    "humidity_pct",
    "wind_speed_kmh",
    "speed_ratio",
    "jam_factor",
)
SLOTS_PER_DAY = SECONDS_PER_DAY // SLOT_SECONDS

# New Delhi collection area
DEFAULT_BBOX_CORNERS = ((28.747193, 77.091064), (28.495247, 77.304611))


@dataclass(frozen=True)
class BoundingBox:
    corner_a: tuple[float, float]
    corner_b: tuple[float, float]

    def __post_init__(self):
        for name in ("corner_a", "corner_b"):
            lat, lon = getattr(self, name)
            if not -90.0 <= lat <= 90.0:
                raise ValidationError(f"{name} latitude {lat} outside [-90, 90]", field=name)
            if not -180.0 <= lon <= 180.0:
                raise ValidationError(f"{name} longitude {lon} outside [-180, 180]", field=name)
            object.__setattr__(self, name, (float(lat), float(lon)))
        if self.corner_a == self.corner_b:
            raise ValidationError("bounding box corners must be distinct", field="corner_b")

    def as_query(self) -> str:
        (a_lat, a_lon), (b_lat, b_lon) = self.corner_a, self.corner_b
        return f"{a_lat},{a_lon};{b_lat},{b_lon}"


@dataclass(frozen=True)
class RoadRecord:
    road_id: str
    jam_factor: float
    current_speed: float
    freeflow_speed: float


@dataclass(frozen=True)
class WeatherRecord:
    temperature_c: float
    humidity_pct: float
    wind_speed_kmh: float
    daylight: bool


# -- payload parsing -----------------------------------------------------------


def _decode(raw) -> object:
    if isinstance(raw, (bytes, bytearray)):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"payload is not UTF-8: {exc}", location="$") from None
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", location="$") from None


def _number(obj: dict, key: str, path: str) -> float:
    if key not in obj:
        raise ParseError("missing field", location=f"{path}.{key}")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ParseError(f"expected a finite number, got {v!r}", location=f"{path}.{key}")
    return float(v)


def parse_traffic_payload(raw) -> list[RoadRecord]:
    doc = _decode(raw)
    if not isinstance(doc, dict) or not isinstance(doc.get("roads"), list):
        raise ParseError("expected an object with a 'roads' array", location="roads")
    records, seen = [], set()
    for k, item in enumerate(doc["roads"]):
        path = f"roads[{k}]"
        if not isinstance(item, dict):
            raise ParseError("expected an object", location=path)
        road_id = item.get("road_id")
        if not isinstance(road_id, str) or not road_id:
            raise ParseError("expected a non-empty string", location=f"{path}.road_id")
        if road_id in seen:
            raise ParseError(f"duplicate road {road_id!r}", location=f"{path}.road_id")
        seen.add(road_id)
        jam = _number(item, "jam_factor", path)
        current = _number(item, "current_speed", path)
        freeflow = _number(item, "freeflow_speed", path)
        if not 0.0 <= jam <= 10.0:
            raise ParseError(f"jam_factor {jam} outside [0, 10]", location=f"{path}.jam_factor")
        if current < 0:
            raise ParseError(f"negative speed {current}", location=f"{path}.current_speed")
        if not freeflow > 0:
            raise ParseError(f"freeflow_speed must be > 0, got {freeflow}", location=f"{path}.freeflow_speed")
        records.append(RoadRecord(road_id, jam, current, freeflow))
    return records


def parse_weather_payload(raw) -> WeatherRecord:
    doc = _decode(raw)
    if not isinstance(doc, dict):
        raise ParseError("expected an object", location="$")
    temperature = _number(doc, "temperature_c", "$")
    humidity = _number(doc, "humidity_pct", "$")
    wind = _number(doc, "wind_speed_kmh", "$")
    daylight = doc.get("daylight")
    if not isinstance(daylight, bool):
        raise ParseError(f"expected a boolean, got {daylight!r}", location="$.daylight")
    if not 0.0 <= humidity <= 100.0:
        raise ParseError(f"humidity {humidity} outside [0, 100]", location="$.humidity_pct")
    if wind < 0:
        raise ParseError(f"negative wind speed {wind}", location="$.wind_speed_kmh")
    return WeatherRecord(temperature, humidity, wind, daylight)


# -- providers -----------------------------------------------------------------


class Provider(Protocol):
    def fetch(self, bbox: BoundingBox, at: int) -> bytes: ...


class HttpProvider:
    """GET ``endpoint?bbox=...&at=...&apiKey=...`` returning a documented payload.

    The key is read from the environment variable named ``api_key_env``.
    """

    def __init__(self, endpoint: str, api_key_env: str | None = None, timeout: float = 10.0):
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.timeout = timeout

    def fetch(self, bbox: BoundingBox, at: int) -> bytes:
        params = {"bbox": bbox.as_query(), "at": str(at)}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if not key:
                raise IngestionError(f"environment variable {self.api_key_env} is not set")
            params["apiKey"] = key
        url = f"{self.endpoint}?{urllib.parse.urlencode(params)}"
        try:
            with urllib.request.urlopen(url, timeout=self.timeout) as resp:
                return resp.read()
        except OSError as exc:
            raise IngestionError(f"request to {self.endpoint} failed: {exc}") from exc


class MockTrafficProvider:
    """Serves traffic payloads computed from the synthetic generative model."""

    def __init__(self, config: "SynthConfig | None" = None, fail_at: Iterable[int] = ()):
        self.config = config or SynthConfig()
        self.fail_at = set(fail_at)
        self.calls: list[int] = []

    def fetch(self, bbox: BoundingBox, at: int) -> bytes:
        self.calls.append(at)
        if at in self.fail_at:
            raise IngestionError(f"mock traffic provider unavailable at t={at}")
        rng = np.random.default_rng([self.config.seed, at])
        base = rush_hour_base(self.config, at)
        roads = []
        for r in range(self.config.roads):
            jam = min(max(base + rng.normal(0.0, self.config.noise_std), 0.0), 10.0)
            freeflow = 60.0
            roads.append(
                {
                    "road_id": road_name(r),
                    "jam_factor": round(jam, 2),
                    "current_speed": round(freeflow * max(1.0 - jam / 10.0, 0.05), 2),
                    "freeflow_speed": freeflow,
                }
            )
        return json.dumps({"roads": roads}).encode("utf-8")


class MockWeatherProvider:
    def __init__(self, seed: int = 0, fail_at: Iterable[int] = ()):
        self.seed = seed
        self.fail_at = set(fail_at)

    def fetch(self, bbox: BoundingBox, at: int) -> bytes:
        if at in self.fail_at:
            raise IngestionError(f"mock weather provider unavailable at t={at}")
        rng = np.random.default_rng([self.seed, at, 1])
        hour = (at % SECONDS_PER_DAY) / 3600.0
        doc = {
            "temperature_c": round(_diurnal_temperature(hour) + rng.normal(0.0, 0.5), 2),
            "humidity_pct": round(float(np.clip(50.0 + rng.normal(0.0, 5.0), 0.0, 100.0)), 2),
            "wind_speed_kmh": round(abs(rng.normal(8.0, 3.0)), 2),
            "daylight": 6.0 <= hour < 18.0,
        }
        return json.dumps(doc).encode("utf-8")


def poll_cycle(
    traffic_client: Provider,
    weather_client: Provider,
    bbox: BoundingBox,
    at: int,
    slot_seconds: int = SLOT_SECONDS,
) -> list[TrafficObservation]:
    """One collection cycle: every road in the traffic payload joined with the weather."""
    if at <= 0 or at % slot_seconds:
        raise DomainError(f"timestamp {at} is not aligned to a {slot_seconds}-second slot")
    try:
        traffic_raw = traffic_client.fetch(bbox, at)
        weather_raw = weather_client.fetch(bbox, at)
    except IngestionError:
        raise
    except OSError as exc:
        raise IngestionError(f"provider request failed: {exc}") from exc
    roads = parse_traffic_payload(traffic_raw)
    weather = parse_weather_payload(weather_raw)
    return [
        TrafficObservation(
            timestamp=at,
            road_id=r.road_id,
            temperature_c=weather.temperature_c,
            daylight=weather.daylight,
            humidity_pct=weather.humidity_pct,
            wind_speed_kmh=weather.wind_speed_kmh,
            speed_ratio=r.current_speed / r.freeflow_speed,
            jam_factor=r.jam_factor,
        )
        for r in roads
    ]


@dataclass
class CollectStats:
    cycles: int = 0
    skipped: int = 0
    rows: int = 0


def collect(
    traffic_client: Provider,
    weather_client: Provider,
    bbox: BoundingBox,
    start: int,
    duration: int,
    interval: int,
    out_path,
    wait_until: Callable[[int], None] | None = None,
) -> CollectStats:
    """Run ``duration // interval`` poll cycles and append their rows to ``out_path``.

    Failed cycles are logged and skipped.  ``wait_until`` blocks until a
    slot's timestamp in live mode; mock runs leave it unset.
    """
    stats = CollectStats()
    for k in range(duration // interval):
        at = start + k * interval
        if wait_until is not None:
            wait_until(at)
        stats.cycles += 1
        try:
            rows = poll_cycle(traffic_client, weather_client, bbox, at, slot_seconds=interval)
        except (IngestionError, ParseError) as exc:
            stats.skipped += 1
            log.warning("skipping poll cycle at t=%d: %s", at, exc)
            continue
        append_csv(rows, out_path)
        stats.rows += len(rows)
    return stats


@dataclass(frozen=True)
class CollectConfig:
    bbox: BoundingBox = field(default_factory=lambda: BoundingBox(*DEFAULT_BBOX_CORNERS))
    poll_interval_seconds: int = SLOT_SECONDS
    traffic_endpoint: str = ""
    weather_endpoint: str = ""
    api_key_env: str = "TRAFFIC_API_KEY"


def load_collect_config(path) -> CollectConfig:
    """Read the flat ``key = value`` collection config."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from None
    known = {"corner_a", "corner_b", "poll_interval_seconds", "traffic_endpoint", "weather_endpoint", "api_key_env"}
    unknown = set(doc) - known
    if unknown:
        raise ParseError(f"unknown config keys {sorted(unknown)}")
    try:
        bbox = BoundingBox(
            tuple(doc.get("corner_a", DEFAULT_BBOX_CORNERS[0])),
            tuple(doc.get("corner_b", DEFAULT_BBOX_CORNERS[1])),
        )
        interval = int(doc.get("poll_interval_seconds", SLOT_SECONDS))
        if interval <= 0:
            raise ValidationError("poll_interval_seconds must be > 0")
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc)) from None
    return CollectConfig(
        bbox=bbox,
        poll_interval_seconds=interval,
        traffic_endpoint=str(doc.get("traffic_endpoint", "")),
        weather_endpoint=str(doc.get("weather_endpoint", "")),
        api_key_env=str(doc.get("api_key_env", "TRAFFIC_API_KEY")),
    )


# -- synthetic data --------------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    roads: int = 4
    days: int = 14
    rush_hour_peaks: tuple[float, float] = (9.0, 18.0)
    weekday_amplitude: float = 6.0
    weekend_amplitude: float = 3.0
    rain_probability: float = 0.05
    rain_jam_boost: float = 2.0
    noise_std: float = 0.5
    start_date: str = "2019-04-15"  # a Monday, 00:00 UTC

    def __post_init__(self):
        if self.roads < 1 or self.days < 1:
            raise ValidationError("roads and days must both be >= 1")
        for name in ("weekday_amplitude", "weekend_amplitude", "rain_jam_boost", "noise_std"):
            if not getattr(self, name) >= 0:
                raise ValidationError(f"{name} must be >= 0", field=name)
        if not 0.0 <= self.rain_probability <= 1.0:
            raise ValidationError("rain_probability must lie in [0, 1]", field="rain_probability")
        object.__setattr__(self, "rush_hour_peaks", tuple(float(h) for h in self.rush_hour_peaks))
        if len(self.rush_hour_peaks) != 2:
            raise ValidationError("rush_hour_peaks needs (morning, evening)", field="rush_hour_peaks")
        date.fromisoformat(self.start_date)

    @property
    def start_timestamp(self) -> int:
        d = date.fromisoformat(self.start_date)
        return int(datetime(d.year, d.month, d.day, tzinfo=timezone.utc).timestamp())


PEAK_WIDTH_HOURS = 1.5


def road_name(index: int) -> str:
    return f"road{index:02d}"


def _bump(hour, peak):
    d = np.abs(np.asarray(hour) - peak) % 24.0
    d = np.minimum(d, 24.0 - d)
    return np.exp(-0.5 * (d / PEAK_WIDTH_HOURS) ** 2)


def rush_hour_base(config: SynthConfig, timestamp):
    """Noise-free jam level: amplitude times the two rush-hour bumps."""
    ts = np.asarray(timestamp)
    hour = (ts % SECONDS_PER_DAY) / 3600.0
    weekday = ((ts // SECONDS_PER_DAY) + 3) % 7  # 1970-01-01 was a Thursday
    amplitude = np.where(weekday >= 5, config.weekend_amplitude, config.weekday_amplitude)
    morning, evening = config.rush_hour_peaks
    base = amplitude * (_bump(hour, morning) + _bump(hour, evening))
    return float(base) if base.ndim == 0 else base


def _diurnal_temperature(hour):
    return 30.0 + 6.0 * np.sin(2.0 * np.pi * (np.asarray(hour) - 9.0) / 24.0)


def synth_generate(config: SynthConfig) -> list[TrafficObservation]:
    """Deterministic synthetic dataset with ``roads * days * 288`` rows.

    Weather is shared by all roads.  Rain raises humidity and adds
    ``rain_jam_boost`` to every road's jam factor in that slot.
    """
    rng = np.random.default_rng(config.seed)
    n_slots = config.days * SLOTS_PER_DAY
    ts = config.start_timestamp + SLOT_SECONDS * np.arange(n_slots, dtype=np.int64)
    hour = (ts % SECONDS_PER_DAY) / 3600.0

    rain = rng.random(n_slots) < config.rain_probability
    temperature = _diurnal_temperature(hour) + rng.normal(0.0, 0.5, n_slots) - 3.0 * rain
    humidity = np.where(
        rain,
        90.0 + 10.0 * rng.random(n_slots),
        np.clip(50.0 - 15.0 * np.sin(2.0 * np.pi * (hour - 9.0) / 24.0) + rng.normal(0.0, 3.0, n_slots), 0.0, 100.0),
    )
    wind = np.abs(rng.normal(8.0, 3.0, n_slots))
    daylight = (hour >= 6.0) & (hour < 18.0)
    noise = rng.normal(0.0, 1.0, (config.roads, n_slots)) * config.noise_std

    base = rush_hour_base(config, ts)
    jam = np.clip(base + config.rain_jam_boost * rain + noise, 0.0, 10.0)
    speed_ratio = np.clip(1.0 - jam / 10.0, 0.05, 1.0)

    rows = []
    for k in range(n_slots):
        for r in range(config.roads):
            rows.append(
                TrafficObservation(
                    timestamp=int(ts[k]),
                    road_id=road_name(r),
                    temperature_c=float(temperature[k]),
                    daylight=bool(daylight[k]),
                    humidity_pct=float(humidity[k]),
                    wind_speed_kmh=float(wind[k]),
                    speed_ratio=float(speed_ratio[r, k]),
                    jam_factor=float(jam[r, k]),
                )
            )
    return rows


def load_synth_config(path) -> SynthConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from None
    fields = set(SynthConfig.__dataclass_fields__)
    unknown = set(doc) - fields
    if unknown:
        raise ParseError(f"unknown config keys {sorted(unknown)}")
    try:
        return SynthConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc)) from None


# -- CSV -------------------------------------------------------------------------


def _row(o: TrafficObservation) -> list[str]:
    return [
        str(int(o.timestamp)),
        o.road_id,
        repr(float(o.temperature_c)),
        "1" if o.daylight else "0",
        repr(float(o.humidity_pct)),
        repr(float(o.wind_speed_kmh)),
        repr(float(o.speed_ratio)),
        repr(float(o.jam_factor)),
    ]


def save_csv(dataset: Sequence[TrafficObservation], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(_row(o) for o in dataset)


def append_csv(rows: Sequence[TrafficObservation], path) -> None:
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if fresh:
            w.writerow(CSV_HEADER)
        w.writerows(_row(o) for o in rows)


def load_csv(path) -> list[TrafficObservation]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ParseError(f"expected header {','.join(CSV_HEADER)}", location="line 1")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise ParseError(f"expected {len(CSV_HEADER)} columns, got {len(row)}", location=f"line {lineno}")
            try:
                if row[3] not in ("0", "1"):
                    raise ValueError(f"daylight must be 0 or 1, got {row[3]!r}")
                out.append(
                    TrafficObservation(
                        timestamp=int(row[0]),
                        road_id=row[1],
                        temperature_c=float(row[2]),
                        daylight=row[3] == "1",
                        humidity_pct=float(row[4]),
                        wind_speed_kmh=float(row[5]),
                        speed_ratio=float(row[6]),
                        jam_factor=float(row[7]),
                    )
                )
            except ValueError as exc:
                raise ParseError(str(exc), location=f"line {lineno}") from None
    return out
