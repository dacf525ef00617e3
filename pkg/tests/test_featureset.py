import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import MONDAY, make_obs
from jamcast.errors import DomainError, InsufficientDataError, ShapeError, ValidationError
from jamcast.featureset import (
    N_FEATURES,
    EncodedSample,
    ScalerParams,
    apply_scaler,
    encode_day_of_week,
    encode_observation,
    encode_time_of_day,
    fit_scaler,
)


def test_time_of_day_midnight():
    assert encode_time_of_day(0) == (0.0, 1.0)


def test_time_of_day_quarter():
    s, c = encode_time_of_day(21600)
    assert s == pytest.approx(1.0, abs=1e-15)
    assert c == pytest.approx(0.0, abs=1e-15)


def test_time_of_day_10000():
    # direct evaluation at phase 2*pi*10000/86400
    s, c = encode_time_of_day(10000)
    assert s == pytest.approx(0.6647958656139378, abs=1e-12)
    assert c == pytest.approx(0.747025071240996, abs=1e-12)


@pytest.mark.parametrize("t", [-1, 86400, 100000])
def test_time_of_day_out_of_range(t):
    with pytest.raises(DomainError):
        encode_time_of_day(t)


def test_day_of_week():
    assert encode_day_of_week(0) == (0.0, 1.0)
    s, c = encode_day_of_week(3)
    assert s == pytest.approx(0.43388373911755823, abs=1e-12)
    assert c == pytest.approx(-0.900968867902419, abs=1e-12)


@pytest.mark.parametrize("d", [-1, 7])
def test_day_of_week_out_of_range(d):
    with pytest.raises(DomainError):
        encode_day_of_week(d)


@given(st.integers(0, 86399))
def test_time_encoding_on_unit_circle(t):
    s, c = encode_time_of_day(t)
    assert abs(s * s + c * c - 1.0) <= 1e-9


def test_encode_zero_observation():
    sample = encode_observation(make_obs())
    assert sample.features.tolist() == [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]
    assert sample.target == 0.0


def test_encode_target_passthrough():
    a = encode_observation(make_obs(jam_factor=10.0))
    b = encode_observation(make_obs(jam_factor=0.0))
    assert a.target == 10.0
    assert np.array_equal(a.features, b.features)


@pytest.mark.parametrize(
    "field,value",
    [("humidity_pct", 120.0), ("jam_factor", 10.5), ("wind_speed_kmh", -1.0), ("speed_ratio", -0.1), ("timestamp", 0)],
)
def test_invalid_observation_names_field(field, value):
    with pytest.raises(ValidationError) as info:
        make_obs(**{field: value})
    assert info.value.field == field


def test_weekday_convention():
    # 2019-04-18 is a Thursday -> day index 3
    sample = encode_observation(make_obs(timestamp=MONDAY + 3 * 86400 + 10000))
    assert sample.features[2:4].tolist() == list(encode_day_of_week(3))
    assert sample.features[0:2].tolist() == list(encode_time_of_day(10000))


obs_fields = st.fixed_dictionaries(
    dict(
        timestamp=st.integers(MONDAY, MONDAY + 7 * 86400 - 1),
        temperature_c=st.floats(-30, 50),
        daylight=st.booleans(),
        humidity_pct=st.floats(0, 100),
        wind_speed_kmh=st.floats(0, 150),
        speed_ratio=st.floats(0, 2),
    )
)


@given(obs_fields, obs_fields)
def test_encoding_injective(a, b):
    ea = encode_observation(make_obs(**a)).features
    eb = encode_observation(make_obs(**b)).features
    if a != b:
        assert not np.array_equal(ea, eb)
    else:
        assert np.array_equal(ea, eb)


@given(obs_fields)
def test_encoded_cyclic_pairs_on_unit_circle(fields):
    f = encode_observation(make_obs(**fields)).features
    assert f.shape == (N_FEATURES,)
    assert np.all(np.isfinite(f))
    assert abs(f[0] ** 2 + f[1] ** 2 - 1) <= 1e-9
    assert abs(f[2] ** 2 + f[3] ** 2 - 1) <= 1e-9


def test_fit_scaler_degenerate_variance():
    s = EncodedSample([1.0, 2.0, 3.0], 0.0)
    params = fit_scaler([s, s])
    assert params.scale.tolist() == [1.0, 1.0, 1.0]


def test_fit_scaler_simple():
    params = fit_scaler([EncodedSample([0.0], 0), EncodedSample([2.0], 0)])
    assert params.mean.tolist() == [1.0]
    assert params.scale.tolist() == [1.0]


@pytest.mark.parametrize("n", [0, 1])
def test_fit_scaler_needs_two(n):
    with pytest.raises(InsufficientDataError):
        fit_scaler([EncodedSample([0.0], 0)] * n)


def test_apply_scaler():
    identity = ScalerParams([0.0], [1.0])
    s = EncodedSample([3.0], 7.0)
    assert apply_scaler(identity, s).features.tolist() == [3.0]
    out = apply_scaler(ScalerParams([1.0], [2.0]), s)
    assert out.features.tolist() == [1.0]
    assert out.target == 7.0
    with pytest.raises(ShapeError):
        apply_scaler(ScalerParams([0.0, 0.0], [1.0, 1.0]), s)


def test_scaler_rejects_nonpositive_scale():
    with pytest.raises(ValidationError):
        ScalerParams([0.0], [0.0])


finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(st.lists(st.lists(finite, min_size=3, max_size=3), min_size=2, max_size=40))
def test_scaler_standardizes_fitting_set(rows):
    samples = [EncodedSample(r, 0.0) for r in rows]
    params = fit_scaler(samples)
    Z = np.stack([apply_scaler(params, s).features for s in samples])
    X = np.array(rows)
    for k in range(3):
        if X[:, k].std() >= 1e-3 * max(1.0, np.abs(X[:, k]).max()):
            assert abs(Z[:, k].mean()) <= 1e-9
            assert abs(Z[:, k].std() - 1.0) <= 1e-9
    assert np.allclose(params.inverse_transform(Z), X, rtol=0, atol=1e-9)
