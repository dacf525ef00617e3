import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import gram_direct, svr_dual_qp, svr_predict
from jamcast.errors import ConvergenceError, InsufficientDataError, ParseError, ShapeError, ValidationError
from jamcast.featureset import EncodedSample, ScalerParams
from jamcast.svr import (
    SvrHyperparams,
    SvrModel,
    _full_coefs,
    dual_objective,
    dumps_model,
    kkt_violation,
    loads_model,
    predict,
    rbf_gram,
    rbf_kernel,
    train_svr,
)

TOY_X = np.array([[0.0], [0.5], [1.0], [1.5], [2.0]])
TOY_Y = np.array([0.2, 1.1, 0.4, -0.3, 0.9])
TOY_HP = SvrHyperparams(C=10.0, epsilon=0.01, gamma=1.0)


def test_kernel_identity():
    assert rbf_kernel([1.0, -2.0], [1.0, -2.0], 0.3) == 1.0


def test_kernel_unit_exponent():
    # gamma * |x - y|^2 = 0.25 * 4 = 1
    assert rbf_kernel([0.0, 0.0], [2.0, 0.0], 0.25) == pytest.approx(math.exp(-1), abs=1e-15)
    assert rbf_kernel([0.0], [2.0], 0.25) == pytest.approx(0.367879, abs=1e-6)


vec = st.lists(st.floats(-10, 10), min_size=3, max_size=3)


@given(vec, vec, st.floats(1e-3, 10))
def test_kernel_symmetric_and_bounded(x, y, gamma):
    k = rbf_kernel(x, y, gamma)
    assert k == rbf_kernel(y, x, gamma)
    assert 0.0 <= k <= 1.0


def test_kernel_shape_mismatch():
    with pytest.raises(ShapeError):
        rbf_kernel([0.0], [0.0, 1.0], 1.0)


def test_gram_matches_direct_evaluation():
    X = np.random.default_rng(0).normal(size=(15, 4))
    assert np.allclose(rbf_gram(X, X, 0.7), gram_direct(X, 0.7), rtol=0, atol=1e-13)


def test_constant_target():
    X = np.random.default_rng(1).normal(size=(30, 3))
    model = train_svr((X, np.full(30, 3.5)), SvrHyperparams(epsilon=0.1))
    assert model.dual_coefs.size == 0
    assert model.bias == pytest.approx(3.5, abs=1e-12)
    assert predict(model, np.zeros(3)) == pytest.approx(3.5, abs=1e-12)
    assert predict(model, np.full(3, 100.0)) == pytest.approx(3.5, abs=1e-12)


def test_toy_set_matches_qp_oracle():
    model = train_svr((TOY_X, TOY_Y), TOY_HP)
    _, _, best = svr_dual_qp(TOY_X, TOY_Y, 10.0, 0.01, 1.0)
    ours = dual_objective((TOY_X, TOY_Y), TOY_HP, _full_coefs(model, TOY_X))
    assert abs(ours - best) <= 1e-3


def test_duplicate_sample_leaves_predictions_unchanged():
    hp = SvrHyperparams(C=1000.0, epsilon=0.01, gamma=1.0, tol=1e-10)
    X2 = np.vstack([TOY_X, TOY_X[2:3]])
    y2 = np.append(TOY_Y, TOY_Y[2])
    base = train_svr((TOY_X, TOY_Y), hp)
    aug = train_svr((X2, y2), hp)
    assert np.abs(base.decision_function(TOY_X) - aug.decision_function(TOY_X)).max() < 1e-6

    # same comparison through the oracle
    b1, c1, _ = svr_dual_qp(TOY_X, TOY_Y, 1000.0, 0.01, 1.0)
    b2, c2, _ = svr_dual_qp(X2, y2, 1000.0, 0.01, 1.0)
    p1 = svr_predict(TOY_X, b1, c1, 1.0, TOY_X)
    p2 = svr_predict(X2, b2, c2, 1.0, TOY_X)
    assert np.abs(p1 - p2).max() < 1e-6


def test_zero_model_predicts_bias():
    model = SvrModel(np.zeros((0, 2)), [], bias=2.5, hyperparams=SvrHyperparams(gamma=1.0), n_features=2)
    assert predict(model, [10.0, -3.0]) == 2.5


def test_free_support_vectors_sit_on_tube_edge():
    model = train_svr((TOY_X, TOY_Y), TOY_HP)
    beta = _full_coefs(model, TOY_X)
    free = (beta != 0) & (np.abs(beta) < TOY_HP.C)
    assert free.any()
    for x, y, b in zip(TOY_X[free], TOY_Y[free], beta[free]):
        expected = y - np.sign(b) * TOY_HP.epsilon
        assert abs(predict(model, x) - expected) <= TOY_HP.tol


def test_predict_shape_mismatch():
    model = train_svr((TOY_X, TOY_Y), TOY_HP)
    with pytest.raises(ShapeError):
        predict(model, [0.0, 1.0])


def test_dual_objective_basics():
    assert dual_objective((TOY_X, TOY_Y), TOY_HP, np.zeros(5)) == 0.0
    model = train_svr((TOY_X, TOY_Y), TOY_HP)
    assert dual_objective((TOY_X, TOY_Y), TOY_HP, _full_coefs(model, TOY_X)) >= 0.0


@pytest.mark.parametrize("coefs", [[1, 0, 0, 0, 0], [11, -11, 0, 0, 0]])
def test_dual_objective_rejects_infeasible(coefs):
    with pytest.raises(ValidationError):
        dual_objective((TOY_X, TOY_Y), TOY_HP, np.array(coefs, dtype=float))


def test_kkt_fresh_model_within_tol():
    model = train_svr((TOY_X, TOY_Y), TOY_HP)
    assert kkt_violation(model, (TOY_X, TOY_Y)) <= TOY_HP.tol


def test_kkt_detects_forced_bound():
    X = np.array([[0.0], [1.0], [2.0]])
    y = np.zeros(3)
    hp = SvrHyperparams(C=1.0, epsilon=0.5, gamma=1.0)
    # coefficient pinned at C on a point whose residual sits inside the tube
    bad = SvrModel(X[:2], [1.0, -1.0], bias=0.0, hyperparams=hp)
    assert kkt_violation(bad, (X, y)) > hp.tol


def test_kkt_zero_model_on_zero_data():
    X = np.array([[0.0], [1.0]])
    hp = SvrHyperparams(epsilon=0.1, gamma=1.0)
    model = SvrModel(np.zeros((0, 1)), [], 0.0, hp, n_features=1)
    assert kkt_violation(model, (X, np.zeros(2))) == 0.0


def test_kkt_accepts_encoded_samples():
    samples = [EncodedSample(x, y) for x, y in zip(TOY_X, TOY_Y)]
    model = train_svr(samples, TOY_HP)
    assert kkt_violation(model, samples) <= TOY_HP.tol


@st.composite
def small_sets(draw):
    n = draw(st.integers(2, 12))
    d = draw(st.integers(1, 3))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return rng.uniform(-2, 2, (n, d)), rng.uniform(0, 10, n), draw(st.sampled_from([0.5, 1.0, 10.0]))


@given(small_sets())
def test_trained_model_invariants(data):
    X, y, C = data
    hp = SvrHyperparams(C=C, epsilon=0.05, gamma=1.0)
    trace = []
    model = train_svr((X, y), hp, trace=trace)
    assert abs(model.dual_coefs.sum()) <= hp.tol
    assert np.all(np.abs(model.dual_coefs) <= C)
    assert kkt_violation(model, (X, y)) <= hp.tol * (1 + 1e-9)
    assert all(b >= a - 1e-12 for a, b in zip(trace, trace[1:]))
    if np.ptp(y) > 2 * (hp.epsilon + hp.tol):
        assert model.dual_coefs.size > 0


def test_training_is_deterministic():
    X = np.random.default_rng(5).normal(size=(60, 4))
    y = np.sin(X[:, 0]) * 3 + 4
    a = dumps_model(train_svr((X, y), seed=3))
    b = dumps_model(train_svr((X, y), seed=3))
    assert a == b


def test_serialization_round_trip_is_bitwise():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(80, 3))
    y = np.clip(2 + X[:, 0] + rng.normal(0, 0.3, 80), 0, 10)
    scaler = ScalerParams([0.1, 0.2, 0.3], [1.5, 2.5, 3.5])
    model = train_svr((X, y), scaler=scaler)
    again = loads_model(dumps_model(model))
    probes = rng.normal(size=(50, 3))
    assert np.array_equal(model.decision_function(probes), again.decision_function(probes))
    assert np.array_equal(again.scaler.mean, scaler.mean)
    assert dumps_model(again) == dumps_model(model)


def test_loads_rejects_garbage():
    with pytest.raises(ParseError):
        loads_model("not a model\n")
    text = dumps_model(train_svr((TOY_X, TOY_Y), TOY_HP))
    with pytest.raises(ParseError):
        loads_model(text.replace("bias =", "bais ="))


def test_non_convergence_raises_with_violation():
    X = np.random.default_rng(7).normal(size=(40, 2))
    y = np.random.default_rng(8).uniform(0, 10, 40)
    with pytest.raises(ConvergenceError) as info:
        train_svr((X, y), SvrHyperparams(tol=1e-12, max_passes=1))
    assert info.value.violation > 1e-12


def test_insufficient_data():
    with pytest.raises(InsufficientDataError):
        train_svr((np.zeros((1, 2)), np.zeros(1)))


@pytest.mark.parametrize("kw", [dict(C=0), dict(epsilon=-1), dict(gamma=0), dict(tol=0), dict(max_passes=0)])
def test_hyperparam_validation(kw):
    with pytest.raises(ValidationError):
        SvrHyperparams(**kw)


def test_default_gamma_is_inverse_dimension():
    X = np.random.default_rng(9).normal(size=(10, 4))
    model = train_svr((X, X[:, 0]))
    assert model.hyperparams.gamma == 0.25
