"""Gaussian-process regression on unit-cube inputs.

Isotropic squared-exponential kernel, Cholesky-based fit, closed-form
posterior mean and variance. Targets are centered, so far from the data the
posterior reverts to the sample mean with the full signal variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

LENGTH_SCALE_GRID = (0.05, 0.1, 0.2, 0.5)
BASE_JITTER = 1e-6
MAX_JITTER_ESCALATIONS = 6
_UNIT_TOL = 1e-9


class GPError(ValueError):
    pass


@dataclass(frozen=True)
class KernelConfig:
    length_scale: float
    signal_variance: float = 1.0
    noise_variance: float = 0.0

    def __post_init__(self) -> None:
        if not self.length_scale > 0:
            raise GPError(f"length_scale must be > 0, got {self.length_scale}")
        if not self.signal_variance > 0:
            raise GPError(f"signal_variance must be > 0, got {self.signal_variance}")
        if not self.noise_variance >= 0:
            raise GPError(f"noise_variance must be >= 0, got {self.noise_variance}")


@dataclass(frozen=True)
class Posterior:
    mean: float
    variance: float

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True, eq=False)
class GpModel:
    X: np.ndarray
    y: np.ndarray  # centered targets
    y_mean: float
    kernel: KernelConfig
    L: np.ndarray
    alpha: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def y_observed(self) -> np.ndarray:
        return self.y + self.y_mean


def kernel_eval(a, b, cfg: KernelConfig) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise GPError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    d2 = float(np.sum((a - b) ** 2))
    return cfg.signal_variance * math.exp(-d2 / (2.0 * cfg.length_scale**2))


def kernel_matrix(A: np.ndarray, B: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise GPError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    diff = A[:, None, :] - B[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    return cfg.signal_variance * np.exp(-d2 / (2.0 * cfg.length_scale**2))


def _check_inputs(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] < 1:
        raise GPError("need at least one training point")
    if X.shape[0] != y.shape[0]:
        raise GPError(f"{X.shape[0]} inputs but {y.shape[0]} targets")
    if not np.all(np.isfinite(y)):
        raise GPError("training targets must be finite")
    if not np.all(np.isfinite(X)) or X.min() < -_UNIT_TOL or X.max() > 1 + _UNIT_TOL:
        raise GPError("training inputs must lie in the unit cube")
    return X, y


def fit_gp(X, y, cfg: KernelConfig) -> GpModel:
    """Condition a GP on ``(X, y)``.

    If ``K + noise*I`` is not numerically positive definite (duplicate inputs
    are routine under parallel search), the noise term is multiplied by 10
    up to six times before giving up.
    """
    X, y = _check_inputs(X, y)
    y_mean = float(np.mean(y))
    yc = y - y_mean
    K = kernel_matrix(X, X, cfg)
    n = K.shape[0]
    noise = cfg.noise_variance
    for attempt in range(MAX_JITTER_ESCALATIONS + 1):
        if attempt:
            noise = noise * 10.0 if noise > 0 else 1e-10 * cfg.signal_variance
        try:
            L = np.linalg.cholesky(K + noise * np.eye(n))
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)) and np.all(np.diag(L) > 0):
            break
    else:
        raise GPError(f"Cholesky failed after {MAX_JITTER_ESCALATIONS} jitter escalations")
    if noise != cfg.noise_variance:
        cfg = KernelConfig(cfg.length_scale, cfg.signal_variance, noise)
    alpha = cho_solve((L, True), yc)
    return GpModel(X=X, y=yc, y_mean=y_mean, kernel=cfg, L=L, alpha=alpha)


def predict_many(model: GpModel, Xs) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and (latent) variance at each row of ``Xs``."""
    Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
    if Xs.shape[1] != model.dim:
        raise GPError(f"dimension mismatch: model has {model.dim}, query has {Xs.shape[1]}")
    Ks = kernel_matrix(model.X, Xs, model.kernel)  # n x m
    mean = model.y_mean + Ks.T @ model.alpha
    V = solve_triangular(model.L, Ks, lower=True)
    var = model.kernel.signal_variance - np.sum(V * V, axis=0)
    return mean, np.maximum(var, 0.0)


def predict(model: GpModel, x) -> Posterior:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != model.dim:
        raise GPError(f"dimension mismatch: model has {model.dim}, query has {x.shape[0]}")
    mean, var = predict_many(model, x[None, :])
    return Posterior(float(mean[0]), float(var[0]))


def log_marginal_likelihood(model: GpModel) -> float:
    n = model.n
    return float(
        -0.5 * model.y @ model.alpha
        - np.sum(np.log(np.diag(model.L)))
        - 0.5 * n * math.log(2.0 * math.pi)
    )


def default_kernel(y, length_scale: float) -> KernelConfig:
    s2 = max(float(np.var(np.asarray(y, dtype=float))), 1e-12)
    return KernelConfig(length_scale, s2, BASE_JITTER * s2)


def fit_auto(X, y, length_scales=LENGTH_SCALE_GRID) -> GpModel:
    """Fit with data-driven signal variance and the length scale of highest evidence.

    Ties in log marginal likelihood keep the earlier grid entry.
    """
    best: GpModel | None = None
    best_lml = -math.inf
    for ls in length_scales:
        model = fit_gp(X, y, default_kernel(y, ls))
        lml = log_marginal_likelihood(model)
        if best is None or lml > best_lml:
            best, best_lml = model, lml
    return best
