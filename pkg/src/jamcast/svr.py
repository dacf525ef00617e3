"""Epsilon-SVR with an RBF kernel, trained by sequential minimal optimization.

The dual is solved in the stacked form over ``2n`` variables
``a = [alpha, alpha_star]`` with labels ``s = [+1]*n + [-1]*n``::

    minimize   0.5 * a' Q a + p' a
    subject to s' a = 0,  0 <= a <= C

where ``Q[i, j] = s_i s_j K(x_i, x_j)`` and ``p = [eps - y, eps + y]``.
The regression coefficients are ``beta = alpha - alpha_star`` and the
prediction is ``f(x) = sum_i beta_i K(x_i, x) + bias``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numba
import numpy as np

from .errors import (
    ConvergenceError,
    InsufficientDataError,
    ParseError,
    ShapeError,
    ValidationError,
)
from .featureset import FEATURE_LAYOUT_TAG, EncodedSample, ScalerParams

MODEL_FORMAT = "jamcast-svr 1"


@dataclass(frozen=True)
class SvrHyperparams:
    C: float = 10.0
    epsilon: float = 0.1
    gamma: float | None = None  # None -> 1 / n_features at training time
    tol: float = 1e-3
    max_passes: int = 1000

    def __post_init__(self):
        if not self.C > 0:
            raise ValidationError("C must be > 0", field="C")
        if not self.epsilon >= 0:
            raise ValidationError("epsilon must be >= 0", field="epsilon")
        if self.gamma is not None and not self.gamma > 0:
            raise ValidationError("gamma must be > 0", field="gamma")
        if not self.tol > 0:
            raise ValidationError("tol must be > 0", field="tol")
        if int(self.max_passes) != self.max_passes or self.max_passes < 1:
            raise ValidationError("max_passes must be a positive integer", field="max_passes")

    def resolved(self, n_features: int) -> "SvrHyperparams":
        """Fill in the default ``gamma = 1/d``."""
        if self.gamma is not None:
            return self
        return replace(self, gamma=1.0 / n_features)


@dataclass(frozen=True, eq=False)
class SvrModel:
    support_vectors: np.ndarray  # shape (m, d)
    dual_coefs: np.ndarray  # shape (m,)
    bias: float
    hyperparams: SvrHyperparams
    scaler: ScalerParams | None = None
    feature_layout_tag: str = FEATURE_LAYOUT_TAG
    n_features: int = field(default=0)

    def __post_init__(self):
        sv = np.array(self.support_vectors, dtype=float)
        coefs = np.array(self.dual_coefs, dtype=float).reshape(-1)
        n_features = self.n_features or (sv.shape[1] if sv.ndim == 2 and sv.size else 0)
        if sv.size == 0:
            sv = sv.reshape(0, n_features)
        if sv.ndim != 2 or sv.shape[0] != coefs.shape[0]:
            raise ShapeError("support_vectors and dual_coefs disagree in length")
        sv.setflags(write=False)
        coefs.setflags(write=False)
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "dual_coefs", coefs)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "n_features", int(n_features))

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        """Vectorized raw predictions for scaled rows ``X`` of shape (k, d)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"expected rows with {self.n_features} features, got shape {X.shape}")
        if self.dual_coefs.size == 0:
            return np.full(X.shape[0], self.bias)
        K = rbf_gram(X, self.support_vectors, self.hyperparams.gamma)
        return K @ self.dual_coefs + self.bias


def rbf_kernel(x, y, gamma: float) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ShapeError(f"kernel arguments differ in shape: {x.shape} vs {y.shape}")
    if not gamma > 0:
        raise ValidationError("gamma must be > 0", field="gamma")
    diff = x - y
    return math.exp(-gamma * float(diff @ diff))


def rbf_gram(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """Kernel matrix ``K[i, j] = exp(-gamma * |A_i - B_j|^2)``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    K = np.exp(-gamma * sq)
    if A is B:
        # exact symmetry and unit diagonal despite the expansion's rounding
        K = np.triu(K) + np.triu(K, 1).T
        np.fill_diagonal(K, 1.0)
    return K


def _as_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(samples, tuple) and len(samples) == 2 and isinstance(samples[0], np.ndarray):
        X, y = samples
        return np.asarray(X, dtype=float), np.asarray(y, dtype=float)
    if len(samples) == 0:
        return np.zeros((0, 0)), np.zeros(0)
    X = np.stack([np.asarray(s.features, dtype=float) for s in samples])
    y = np.array([s.target for s in samples], dtype=float)
    return X, y


def dual_objective(samples, hp: SvrHyperparams, dual_coefs) -> float:
    """Dual objective (maximization form) at coefficients ``beta``::

        sum_i y_i beta_i - eps * sum_i |beta_i| - 0.5 * beta' K beta
    """
    X, y = _as_arrays(samples)
    beta = np.asarray(dual_coefs, dtype=float)
    if beta.shape != y.shape:
        raise ShapeError("one dual coefficient per sample required")
    if abs(beta.sum()) > 1e-9:
        raise ValidationError(f"dual coefficients must sum to 0, got {beta.sum():.3g}")
    if np.any(np.abs(beta) > hp.C * (1 + 1e-12)):
        raise ValidationError("dual coefficients must satisfy |beta| <= C")
    gamma = hp.resolved(X.shape[1]).gamma
    K = rbf_gram(X, X, gamma)
    return float(y @ beta - hp.epsilon * np.abs(beta).sum() - 0.5 * beta @ K @ beta)


def kkt_violation(model: SvrModel, samples) -> float:
    """Largest KKT violation of ``model`` over ``samples``.

    ``samples`` must be the training rows in training order; coefficients of
    rows that are not support vectors are zero.  Residuals ``r = y - f(x)``
    must satisfy ``|r| <= eps`` at zero coefficients, ``r = +-eps`` at free
    ones and ``+-r >= eps`` at the box bounds.
    """
    X, y = _as_arrays(samples)
    beta = _full_coefs(model, X)
    eps = model.hyperparams.epsilon
    C = model.hyperparams.C
    r = y - model.decision_function(X)
    upper = beta >= C * (1 - 1e-12)
    lower = beta <= -C * (1 - 1e-12)
    pos = (beta > 0) & ~upper
    neg = (beta < 0) & ~lower
    zero = beta == 0
    v = np.zeros_like(r)
    v[zero] = np.maximum(0.0, np.abs(r[zero]) - eps)
    v[pos] = np.abs(r[pos] - eps)
    v[neg] = np.abs(r[neg] + eps)
    v[upper] = np.maximum(0.0, eps - r[upper])
    v[lower] = np.maximum(0.0, r[lower] + eps)
    return float(v.max()) if v.size else 0.0


def _full_coefs(model: SvrModel, X: np.ndarray) -> np.ndarray:
    """Scatter support-vector coefficients back onto the rows of ``X``."""
    beta = np.zeros(X.shape[0])
    if model.dual_coefs.size == 0:
        return beta
    lookup: dict[bytes, list[int]] = {}
    for k, sv in enumerate(model.support_vectors):
        lookup.setdefault(sv.tobytes(), []).append(k)
    for i, row in enumerate(np.ascontiguousarray(X)):
        ks = lookup.get(row.tobytes())
        if ks:
            beta[i] = model.dual_coefs[ks.pop(0)]
    return beta


def train_svr(
    samples,
    hp: SvrHyperparams | None = None,
    seed: int = 0,
    *,
    scaler: ScalerParams | None = None,
    trace: list | None = None,
) -> SvrModel:
    """Train on already-scaled samples.

    ``samples`` is a sequence of :class:`EncodedSample` or an ``(X, y)`` pair.
    The solver is deterministic (maximal violating pair, lowest index on
    ties); ``seed`` is recorded for provenance only.  When ``trace`` is a
    list, the dual objective after every pair update is appended to it.
    """
    hp = hp or SvrHyperparams()
    X, y = _as_arrays(samples)
    n = y.shape[0]
    if n < 2:
        raise InsufficientDataError(f"need at least 2 training samples, got {n}")
    if X.ndim != 2 or X.shape[0] != n:
        raise ShapeError("features must form an (n, d) matrix")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValidationError("features and targets must be finite")
    hp = hp.resolved(X.shape[1])
    K = rbf_gram(X, X, hp.gamma)
    beta, bias = _smo(K, y, hp, trace)
    keep = beta != 0
    return SvrModel(
        support_vectors=X[keep],
        dual_coefs=beta[keep],
        bias=bias,
        hyperparams=hp,
        scaler=scaler,
        n_features=X.shape[1],
    )


def _smo(K: np.ndarray, y: np.ndarray, hp: SvrHyperparams, trace: list | None):
    n = y.shape[0]
    C = float(hp.C)
    max_iter = int(hp.max_passes) * n
    a, G, n_iter, gap, objectives = _smo_kernel(
        np.ascontiguousarray(K), y, C, float(hp.epsilon), float(hp.tol), max_iter, trace is not None
    )
    if trace is not None:
        trace.extend(objectives[: n_iter + 1].tolist())
    if gap > hp.tol:
        raise ConvergenceError(
            f"SMO did not reach tol={hp.tol:g} within {max_iter} pair updates "
            f"(KKT gap {gap:.3g})",
            violation=float(gap),
        )
    s = np.concatenate([np.ones(n), -np.ones(n)])
    beta = a[:n] - a[n:]
    # round-off can leave alpha and alpha_star both at the same bound
    beta[np.abs(beta) < 1e-15 * C] = 0.0
    return beta, -_rho(a, G, s, C)


@numba.njit(cache=True)
def _smo_kernel(K, y, C, eps, tol, max_iter, record):
    """Maximal-violating-pair SMO on the stacked dual.

    Returns ``(a, G, iterations, final_gap, objectives)``; ``objectives``
    holds the dual objective after every update when ``record`` is set.
    """
    n = y.shape[0]
    m = 2 * n
    s = np.empty(m)
    p = np.empty(m)
    for t in range(n):
        s[t] = 1.0
        s[t + n] = -1.0
        p[t] = eps - y[t]
        p[t + n] = eps + y[t]
    a = np.zeros(m)
    G = p.copy()
    objectives = np.empty(max_iter + 1 if record else 1)
    objectives[0] = 0.0
    gap = np.inf
    it = 0
    while True:
        # i: largest -s*G over I_up, j: smallest over I_low; first index wins ties
        i = -1
        j = -1
        gmax = -np.inf
        gmin = np.inf
        for t in range(m):
            v = -s[t] * G[t]
            if (s[t] > 0 and a[t] < C) or (s[t] < 0 and a[t] > 0):
                if v > gmax:
                    gmax = v
                    i = t
            if (s[t] > 0 and a[t] > 0) or (s[t] < 0 and a[t] < C):
                if v < gmin:
                    gmin = v
                    j = t
        gap = gmax - gmin
        if i < 0 or j < 0 or gap <= tol or it >= max_iter:
            break
        ki = i % n
        kj = j % n
        Qij = s[i] * s[j] * K[ki, kj]
        ai_old = a[i]
        aj_old = a[j]
        if s[i] != s[j]:
            quad = K[ki, ki] + K[kj, kj] + 2.0 * Qij
            if quad <= 0.0:
                quad = 1e-12
            delta = (-G[i] - G[j]) / quad
            diff = ai_old - aj_old
            ai = ai_old + delta
            aj = aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj = 0.0
                    ai = diff
            elif ai < 0:
                ai = 0.0
                aj = -diff
            if diff > 0:
                if ai > C:
                    ai = C
                    aj = C - diff
            elif aj > C:
                aj = C
                ai = C + diff
        else:
            quad = K[ki, ki] + K[kj, kj] - 2.0 * Qij
            if quad <= 0.0:
                quad = 1e-12
            delta = (G[i] - G[j]) / quad
            total = ai_old + aj_old
            ai = ai_old - delta
            aj = aj_old + delta
            if total > C:
                if ai > C:
                    ai = C
                    aj = total - C
            elif aj < 0:
                aj = 0.0
                ai = total
            if total > C:
                if aj > C:
                    aj = C
                    ai = total - C
            elif ai < 0:
                ai = 0.0
                aj = total
        a[i] = ai
        a[j] = aj
        di = (ai - ai_old) * s[i]
        dj = (aj - aj_old) * s[j]
        for u in range(n):
            du = di * K[u, ki] + dj * K[u, kj]
            G[u] += du
            G[u + n] -= du
        it += 1
        if record:
            f = 0.0
            for t in range(m):
                f += a[t] * (G[t] + p[t])
            objectives[it] = -0.5 * f
    return a, G, it, gap, objectives


def _rho(a, G, s, C) -> float:
    sG = s * G
    at_upper = a >= C
    at_lower = a <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        return float(sG[free].mean())
    ub_mask = (at_upper & (s < 0)) | (at_lower & (s > 0))
    lb_mask = (at_upper & (s > 0)) | (at_lower & (s < 0))
    ub = sG[ub_mask].min() if ub_mask.any() else math.inf
    lb = sG[lb_mask].max() if lb_mask.any() else -math.inf
    return float((ub + lb) / 2)


def predict(model: SvrModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_features,):
        raise ShapeError(f"expected {model.n_features} features, got shape {x.shape}")
    return float(model.decision_function(x[None, :])[0])


# -- serialization -----------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def dumps_model(model: SvrModel) -> str:
    """Serialize to the self-describing text format.

    A ``key = value`` header is followed by one ``sv`` line per support
    vector (coefficient first).  Floats use ``repr`` so they round-trip
    exactly.
    """
    hp = model.hyperparams
    lines = [
        MODEL_FORMAT,
        f"feature_layout_tag = {model.feature_layout_tag}",
        f"n_features = {model.n_features}",
        f"C = {_fmt(hp.C)}",
        f"epsilon = {_fmt(hp.epsilon)}",
        f"gamma = {_fmt(hp.gamma)}",
        f"tol = {_fmt(hp.tol)}",
        f"max_passes = {int(hp.max_passes)}",
        f"bias = {_fmt(model.bias)}",
    ]
    if model.scaler is not None:
        lines.append("scaler_mean = " + " ".join(_fmt(v) for v in model.scaler.mean))
        lines.append("scaler_scale = " + " ".join(_fmt(v) for v in model.scaler.scale))
    lines.append(f"n_support = {model.dual_coefs.shape[0]}")
    for coef, sv in zip(model.dual_coefs, model.support_vectors):
        lines.append("sv " + " ".join(_fmt(v) for v in (coef, *sv)))
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> SvrModel:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MODEL_FORMAT:
        raise ParseError(f"not a model file (expected {MODEL_FORMAT!r})", location="line 1")
    header: dict[str, str] = {}
    rows: list[list[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            if line.startswith("sv "):
                rows.append([float(tok) for tok in line[3:].split()])
            else:
                key, _, value = line.partition("=")
                if not _:
                    raise ValueError("expected 'key = value'")
                header[key.strip()] = value.strip()
        except ValueError as exc:
            raise ParseError(str(exc), location=f"line {lineno}") from None
    try:
        d = int(header["n_features"])
        hp = SvrHyperparams(
            C=float(header["C"]),
            epsilon=float(header["epsilon"]),
            gamma=float(header["gamma"]),
            tol=float(header["tol"]),
            max_passes=int(header["max_passes"]),
        )
        scaler = None
        if "scaler_mean" in header:
            scaler = ScalerParams(
                [float(v) for v in header["scaler_mean"].split()],
                [float(v) for v in header["scaler_scale"].split()],
            )
        n_support = int(header["n_support"])
        bias = float(header["bias"])
        tag = header["feature_layout_tag"]
    except KeyError as exc:
        raise ParseError(f"missing header key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    if len(rows) != n_support or any(len(r) != d + 1 for r in rows):
        raise ParseError(f"expected {n_support} support vector rows of {d + 1} values")
    arr = np.array(rows, dtype=float).reshape(n_support, d + 1)
    return SvrModel(
        support_vectors=arr[:, 1:],
        dual_coefs=arr[:, 0],
        bias=bias,
        hyperparams=hp,
        scaler=scaler,
        feature_layout_tag=tag,
        n_features=d,
    )


def save_model(model: SvrModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(model))


def load_model(path) -> SvrModel:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
