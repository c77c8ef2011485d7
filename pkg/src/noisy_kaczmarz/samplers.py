"""Row-selection rules.

``norm_squared``
    row ``i`` with probability ``||a_i||^2 / ||A||_F^2``.
``relaxed_greedy``
    threshold ``mu = theta * max_i r_i^2/||a_i||^2 + (1 - theta) ||r||^2/||A||_F^2``,
    candidate set ``U = {i : r_i^2/||a_i||^2 >= mu}``, then ``i in U`` with
    probability ``r_i^2 / sum_{j in U} r_j^2``.
``maximal_correction``
    the ``theta = 1`` rule made deterministic: the smallest index attaining
    the maximum.

Random draws go through an inverse CDF on one uniform number, which keeps the
stream consumption fixed (one draw per iteration) and lets the compiled and
numpy solver loops share the same uniforms.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ContractError, InvariantError
from .matrix import RowMatrix

#: relative slack on the candidate-set comparison; keeps the argmax row in U
MEMBERSHIP_RTOL = 1e-12


class SamplerKind(Enum):
    UNIFORM = "uniform"
    NORM_SQUARED = "norm_squared"
    RELAXED_GREEDY = "relaxed_greedy"
    MAXIMAL_CORRECTION = "maximal_correction"


@dataclass(frozen=True)
class GreedyState:
    theta: float
    mu: float
    candidates: np.ndarray
    restricted_residual: np.ndarray
    candidate_ratios: np.ndarray

    @property
    def candidate_set(self) -> list[int]:
        return [int(i) for i in self.candidates]


def _check_theta(theta):
    if not (0.0 <= theta <= 1.0):
        raise ContractError(f"theta must lie in [0, 1], got {theta}")


def normalized_residuals(r, A: RowMatrix) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (A.m,):
        raise ContractError(f"residual has shape {r.shape}, expected ({A.m},)")
    return r * r / A.row_norm_sq


def compute_mu(r, A: RowMatrix, theta: float) -> float:
    """Greedy threshold interpolating between the max and mean normalized residual."""
    _check_theta(theta)
    ratio = normalized_residuals(r, A)
    r = np.asarray(r, dtype=np.float64)
    return float(theta * ratio.max() + (1.0 - theta) * float(r @ r) / A.frob_sq)


def greedy_set(r, A: RowMatrix, mu: float, theta: float = float("nan")) -> GreedyState:
    r = np.asarray(r, dtype=np.float64)
    ratio = normalized_residuals(r, A)
    U = np.flatnonzero(ratio >= mu - MEMBERSHIP_RTOL * mu)
    if U.size == 0:
        raise InvariantError("empty candidate set; mu exceeds the maximum ratio")
    restricted = np.zeros_like(r)
    restricted[U] = r[U]
    return GreedyState(theta=theta, mu=mu, candidates=U, restricted_residual=restricted,
                       candidate_ratios=ratio[U])


def relaxed_greedy_state(r, A: RowMatrix, theta: float) -> GreedyState:
    """``compute_mu`` followed by ``greedy_set``."""
    return greedy_set(r, A, compute_mu(r, A, theta), theta)


def sample_greedy(state: GreedyState, rng=None, u: float | None = None,
                  deterministic: bool = False) -> int:
    """Pick a candidate with probability proportional to its squared residual.

    Exactly one uniform is consumed from ``rng`` unless ``u`` is supplied or
    ``deterministic`` is set (maximal correction: smallest argmax, no draw).
    """
    U = state.candidates
    w = state.restricted_residual[U] ** 2
    if deterministic:
        # np.argmax returns the first maximizer, i.e. the smallest row index
        return int(U[int(np.argmax(state.candidate_ratios))])
    if u is None:
        u = rng.random()
    return int(U[_inverse_cdf(np.cumsum(w), u)])


def sample_norm_squared(A: RowMatrix, rng=None, u: float | None = None) -> int:
    """Row ``i`` with probability ``||a_i||^2 / ||A||_F^2``."""
    if A.frob_sq <= 0.0:
        raise ContractError("cannot sample rows of a zero matrix")
    if u is None:
        u = rng.random()
    return _inverse_cdf(A.row_cdf, u)


def sample_uniform(A: RowMatrix, rng=None, u: float | None = None) -> int:
    if u is None:
        u = rng.random()
    return min(int(u * A.m), A.m - 1)


def _inverse_cdf(cdf, u):
    """First index with ``cdf[i] > u * cdf[-1]``, clamped to the last index."""
    idx = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(idx, cdf.size - 1)
