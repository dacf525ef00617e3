import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from jamcast.featureset import TrafficObservation  # noqa: E402
from jamcast.ingestion import SynthConfig, synth_generate  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

MONDAY = 1555286400  # 2019-04-15 00:00 UTC


def make_obs(**overrides):
    fields = dict(
        timestamp=MONDAY,
        road_id="r1",
        temperature_c=0.0,
        daylight=True,
        humidity_pct=0.0,
        wind_speed_kmh=0.0,
        speed_ratio=0.0,
        jam_factor=0.0,
    )
    fields.update(overrides)
    return TrafficObservation(**fields)


@pytest.fixture
def obs_factory():
    return make_obs


@pytest.fixture(scope="session")
def synth_two_weeks():
    return synth_generate(SynthConfig(seed=11, roads=4, days=14, noise_std=0.5))


_acceptance_results = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None and report.when == "call":
        _acceptance_results.append((marker.args[0], report.passed, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, duration in _acceptance_results:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  ({duration:.2f} s)")
