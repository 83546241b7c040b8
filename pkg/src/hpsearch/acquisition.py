"""Expected improvement and the candidate-sampling proposal step."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .surrogate import GpModel, fit_gp, predict_many

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class AcquisitionConfig:
    """``xi=None`` means ``max(0.01 * |f_best|, 1e-4)`` at proposal time."""

    xi: float | None = None
    n_candidates: int = 2000
    pending_radius: float = 0.02

    def __post_init__(self) -> None:
        if self.xi is not None and not self.xi >= 0:
            raise ValueError(f"xi must be >= 0, got {self.xi}")
        if int(self.n_candidates) != self.n_candidates or self.n_candidates < 1:
            raise ValueError(f"n_candidates must be a positive integer, got {self.n_candidates}")
        if not self.pending_radius >= 0:
            raise ValueError(f"pending_radius must be >= 0, got {self.pending_radius}")

    def xi_for(self, f_best: float) -> float:
        if self.xi is not None:
            return self.xi
        return max(0.01 * abs(f_best), 1e-4)

    def to_dict(self) -> dict:
        out = {"n_candidates": self.n_candidates, "pending_radius": self.pending_radius}
        if self.xi is not None:
            out["xi"] = self.xi
        return out


@dataclass(frozen=True)
class Proposal:
    point: np.ndarray
    ei_value: float


def expected_improvement(mu: float, var: float, f_best: float, xi: float = 0.0) -> float:
    """EI for minimization: E[max(f_best - xi - Y, 0)] with Y ~ N(mu, var)."""
    if var < 0:
        raise ValueError("variance must be >= 0")
    imp = f_best - mu - xi
    sigma = math.sqrt(var)
    if sigma == 0.0:
        return max(imp, 0.0)
    z = imp / sigma
    ei = imp * 0.5 * math.erfc(-z / math.sqrt(2.0)) + sigma * _INV_SQRT_2PI * math.exp(-0.5 * z * z)
    return max(ei, 0.0)


def expected_improvement_many(mu, var, f_best: float, xi: float = 0.0) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    sigma = np.sqrt(np.maximum(np.asarray(var, dtype=float), 0.0))
    imp = f_best - mu - xi
    out = np.maximum(imp, 0.0)
    pos = sigma > 0
    z = imp[pos] / sigma[pos]
    out[pos] = imp[pos] * ndtr(z) + sigma[pos] * _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return np.maximum(out, 0.0)


def with_liars(model: GpModel, pending: np.ndarray, value: float) -> GpModel:
    """Refit ``model`` with every pending point imputed at ``value``."""
    X = np.vstack([model.X, pending])
    y = np.concatenate([model.y_observed, np.full(pending.shape[0], value)])
    return fit_gp(X, y, model.kernel)


def propose(
    model: GpModel,
    pending: Sequence[Sequence[float]] = (),
    cfg: AcquisitionConfig = AcquisitionConfig(),
    rng: np.random.Generator | None = None,
) -> Proposal:
    """Pick the next query point on the unit cube.

    Scores ``cfg.n_candidates`` uniform candidates by EI under the model
    refit with constant liars at the in-flight points, ignores candidates
    within ``cfg.pending_radius`` of a pending point (unless that leaves
    nothing), and returns the first maximizer.
    """
    if model is None:
        raise ValueError("propose needs a fitted model")
    if rng is None:
        raise ValueError("propose needs an explicit random generator")
    d = model.dim
    f_best = float(np.min(model.y_observed))
    xi = cfg.xi_for(f_best)

    cand = rng.random((cfg.n_candidates, d))
    pend = np.asarray(pending, dtype=float).reshape(-1, d) if len(pending) else np.empty((0, d))

    scoring = with_liars(model, pend, f_best) if pend.shape[0] else model
    mu, var = predict_many(scoring, cand)
    ei = expected_improvement_many(mu, var, f_best, xi)

    if pend.shape[0]:
        dist = np.sqrt(((cand[:, None, :] - pend[None, :, :]) ** 2).sum(axis=2)).min(axis=1)
        allowed = dist >= cfg.pending_radius
        if allowed.any():
            ei = np.where(allowed, ei, -np.inf)

    i = int(np.argmax(ei))
    return Proposal(point=cand[i].copy(), ei_value=float(max(ei[i], 0.0)))
