"""Convergence-bound quantities for relaxed greedy Kaczmarz on noisy systems.

Notation (``A`` is the matrix the solver iterates on, ``Ã`` or ``Ā``)::

    gamma       = ||A||_F^2 - min_i ||a_i||^2 = max_i sum_{j != i} ||a_j||^2
    first step  = 1 - s^2 / ||A||_F^2
    steady      = 1 - (theta ||A||_F^2 / gamma + 1 - theta) s^2 / ||A||_F^2
    horizon     = ||E xhat - eps||^2 / (||A||_F - gamma / ||A||_F)^2

where ``s`` is the smallest positive singular value over all nonzero row
submatrices of ``A``.  ``gamma = 0`` (a single row) makes the greedy term
unbounded; the steady factor is then reported as ``-inf``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ContractError, DomainError
from .matrix import RowMatrix, as_vector, min_singular_value, singular_values, spectral_norm
from .noise import GroundTruth, MultiplicativePerturbation, noise_offset_norm
from .samplers import relaxed_greedy_state, sample_greedy

#: largest row count for exhaustive submatrix enumeration (4095 subsets)
DEFAULT_MAX_ROWS = 12


@dataclass(frozen=True)
class BoundReport:
    """Quantities entering the one-step error bound.

    ``horizon`` is the single-measurement noise term and ``horizon_per_n``
    the same term divided by ``N``.  ``sigma_min_tilde_exact`` is False when
    the full-matrix surrogate replaced subset enumeration.
    """

    gamma: float
    frob_sq: float
    sigma_min: float
    sigma_min_tilde: float
    sigma_min_tilde_exact: bool
    contraction_first_step: float
    contraction_steady: float
    horizon: float
    horizon_per_n: float
    theta: float
    N: int

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def _dense(A: RowMatrix) -> np.ndarray:
    return A.dense if A.dense is not None else A.to_dense()


def _check_theta(theta):
    if not 0.0 <= theta <= 1.0:
        raise ContractError(f"theta must lie in [0, 1], got {theta}")


def compute_gamma(A: RowMatrix) -> float:
    """Largest leave-one-out sum of squared row norms."""
    if A.frob_sq == 0.0:
        raise ContractError("gamma is undefined for the zero matrix")
    return float(A.frob_sq - A.row_norm_sq.min())


def smallest_positive_singular_value(M) -> float:
    """Smallest singular value above the numerical-rank cutoff (0.0 for ``M = 0``)."""
    M = np.asarray(M, dtype=np.float64)
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0.0
    cutoff = max(M.shape) * np.finfo(np.float64).eps * s[0]
    return float(s[s > cutoff].min())


def sigma_min_tilde(A: RowMatrix, max_rows: int = DEFAULT_MAX_ROWS) -> tuple[float, bool]:
    """Smallest positive singular value over all nonzero row submatrices.

    Subsets are enumerated when ``m <= max_rows``; otherwise the smallest
    positive singular value of the whole matrix is returned as a surrogate
    and the flag is False.

    Returns
    -------
    value : float
    exact : bool
    """
    if A.frob_sq == 0.0:
        raise ContractError("sigma_min_tilde is undefined for the zero matrix")
    D = _dense(A)
    m, n = D.shape
    if m > max_rows:
        return smallest_positive_singular_value(D), False
    eps = np.finfo(np.float64).eps
    best = math.inf
    rows = np.arange(m)
    for size in range(1, m + 1):
        subsets = np.array(list(itertools.combinations(rows, size)), dtype=np.intp)
        # one batched SVD per subset size
        s = np.linalg.svd(D[subsets], compute_uv=False)
        top = s[:, 0]
        live = top > 0.0
        if not np.any(live):
            continue
        s, top = s[live], top[live]
        cutoff = (max(size, n) * eps * top)[:, None]
        masked = np.where(s > cutoff, s, np.inf)
        best = min(best, float(masked.min()))
    return best, True


def _factors(frob_sq, gamma, s2, theta):
    first = 1.0 - s2 / frob_sq
    if gamma == 0.0:
        steady = first if theta == 0.0 else -math.inf
    else:
        steady = 1.0 - (theta * frob_sq / gamma + 1.0 - theta) * s2 / frob_sq
    return first, steady


def _report_for(A: RowMatrix, offset_sq: float, theta: float, N: int,
                max_rows: int) -> BoundReport:
    _check_theta(theta)
    if N < 1:
        raise ContractError("N must be at least 1")
    gamma = compute_gamma(A)
    frob_sq = float(A.frob_sq)
    s, exact = sigma_min_tilde(A, max_rows)
    first, steady = _factors(frob_sq, gamma, s * s, theta)
    frob = math.sqrt(frob_sq)
    horizon = offset_sq / (frob - gamma / frob) ** 2
    return BoundReport(
        gamma=gamma, frob_sq=frob_sq, sigma_min=min_singular_value(A),
        sigma_min_tilde=s, sigma_min_tilde_exact=exact,
        contraction_first_step=first, contraction_steady=steady,
        horizon=horizon, horizon_per_n=horizon / N, theta=float(theta), N=int(N),
    )


def theorem1_report(A_tilde: RowMatrix, truth: GroundTruth, E, eps, theta: float,
                    N: int = 1, max_rows: int = DEFAULT_MAX_ROWS) -> BoundReport:
    """Bound quantities for RGRK on ``Ã = A + E``, ``b̃ = b + eps``."""
    if A_tilde.shape != truth.A.shape:
        raise ContractError("noisy matrix and ground truth differ in shape")
    offset = noise_offset_norm(truth, E, eps)
    return _report_for(A_tilde, offset * offset, theta, N, max_rows)


def multiplicative_report(A_tilde: RowMatrix, truth: GroundTruth,
                          pert: MultiplicativePerturbation, eps, theta: float,
                          max_rows: int = DEFAULT_MAX_ROWS) -> BoundReport:
    """As :func:`theorem1_report` with ``dA xhat - eps`` in the horizon numerator."""
    if pert.deltaA.shape != truth.A.shape or A_tilde.shape != truth.A.shape:
        raise ContractError("perturbation and ground truth differ in shape")
    offset = noise_offset_norm(truth, pert.deltaA, eps)
    return _report_for(A_tilde, offset * offset, theta, 1, max_rows)


def total_noise_level(sigma_entry: float, rows: int, cols: int = 1) -> float:
    """Root of the expected squared Frobenius norm of ``sigma_entry * randn(rows, cols)``.

    Converts a per-entry standard deviation into the aggregate level used by
    :func:`theorem2_report` (``cols = 1`` for the right-hand side).
    """
    if sigma_entry < 0:
        raise ContractError("sigma must be non-negative")
    return float(sigma_entry) * math.sqrt(rows * cols)


def theorem2_report(m: int, theta: float, N: int, sigma_e: float, sigma_eps: float,
                    xhat_norm_sq: float, sigma_tilde_sq_mean: float) -> BoundReport:
    """Bound quantities for signal-averaged RGRK with unit-norm rows.

    ``sigma_e`` and ``sigma_eps`` are aggregate noise levels
    (``E||E^j||_F^2 = sigma_e^2``, ``E||eps^j||^2 = sigma_eps^2``); see
    :func:`total_noise_level`.  ``sigma_tilde_sq_mean`` is an estimate or
    lower bound (:func:`markov_sigma_bound`) of the expected squared
    ``sigma_min_tilde`` of the averaged matrix.
    """
    if m < 2:
        raise ContractError("the unit-row bound needs m >= 2")
    _check_theta(theta)
    if N < 1:
        raise ContractError("N must be at least 1")
    for name, v in (("sigma_e", sigma_e), ("sigma_eps", sigma_eps),
                    ("xhat_norm_sq", xhat_norm_sq), ("sigma_tilde_sq_mean", sigma_tilde_sq_mean)):
        if not v >= 0:
            raise ContractError(f"{name} must be non-negative, got {v}")
    gamma = float(m - 1)
    first, steady = _factors(float(m), gamma, float(sigma_tilde_sq_mean), theta)
    root = math.sqrt(m)
    horizon = (sigma_e ** 2 * xhat_norm_sq + sigma_eps ** 2) / (root - gamma / root) ** 2
    return BoundReport(
        gamma=gamma, frob_sq=float(m), sigma_min=math.nan,
        sigma_min_tilde=math.sqrt(sigma_tilde_sq_mean), sigma_min_tilde_exact=False,
        contraction_first_step=first, contraction_steady=steady,
        horizon=horizon, horizon_per_n=horizon / N, theta=float(theta), N=int(N),
    )


def markov_sigma_bound(sigma_min_a: float, sigma_e: float, N: int) -> float:
    """Lower bound ``(sigma_min(A) - t)^2 / 2`` with ``t = sqrt(2/N) sigma_e``."""
    if N < 1:
        raise ContractError("N must be at least 1")
    if sigma_e < 0 or sigma_min_a < 0:
        raise ContractError("singular value and noise level must be non-negative")
    t = math.sqrt(2.0 / N) * sigma_e
    if not t < sigma_min_a:
        raise DomainError(
            f"requires sqrt(2/N)*sigma_e < sigma_min(A); got {t!r} >= {sigma_min_a!r}")
    return 0.5 * (sigma_min_a - t) ** 2


def perturbation_check(A, B) -> float:
    """``max_i |sigma_i(A) - sigma_i(B)|`` over the full spectra."""
    A = _dense(A) if isinstance(A, RowMatrix) else np.asarray(A, dtype=np.float64)
    B = _dense(B) if isinstance(B, RowMatrix) else np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ContractError(f"shape mismatch {A.shape} vs {B.shape}")
    return float(np.max(np.abs(singular_values(A) - singular_values(B))))


def weyl_gap(A, B) -> float:
    """``||A - B||_2 - perturbation_check(A, B)``; non-negative up to rounding."""
    A = _dense(A) if isinstance(A, RowMatrix) else np.asarray(A, dtype=np.float64)
    B = _dense(B) if isinstance(B, RowMatrix) else np.asarray(B, dtype=np.float64)
    return spectral_norm(A - B) - perturbation_check(A, B)


def greedy_weight(r, A: RowMatrix, theta: float) -> float:
    """``w = mu / ||r||^2`` for residual ``r`` (NaN when ``r = 0``)."""
    from .samplers import compute_mu
    r = np.asarray(r, dtype=np.float64)
    rr = float(r @ r)
    if rr == 0.0:
        return math.nan
    return compute_mu(r, A, theta) / rr


def greedy_weight_lower(A: RowMatrix, theta: float, first_step: bool = False) -> float:
    """Lower bound on ``w``: ``1/||A||_F^2`` at step 0, the greedy bound after."""
    _check_theta(theta)
    frob_sq = float(A.frob_sq)
    if first_step:
        return 1.0 / frob_sq
    gamma = compute_gamma(A)
    if gamma == 0.0:
        return math.inf if theta > 0 else 1.0 / frob_sq
    return (theta * frob_sq / gamma + 1.0 - theta) / frob_sq


def one_step_error_sq(x, A: RowMatrix, b, xhat, i: int) -> float:
    """``||x' - xhat||^2`` after projecting ``x`` onto row ``i``."""
    cols, vals = A.row_slice(i)
    beta = float(vals @ x[cols]) - float(b[i])
    d = np.array(x, dtype=np.float64) - xhat
    d[cols] -= (beta / A.row_norm_sq[i]) * vals
    return float(d @ d)


def empirical_one_step(A_tilde: RowMatrix, b_tilde, x, xhat, theta: float,
                       samples: int, rng) -> tuple[float, float]:
    """Monte-Carlo ``E ||x_{k+1} - xhat||^2`` over the relaxed greedy law at ``x``.

    Returns
    -------
    mean, standard_error : float
    """
    if samples < 2:
        raise ContractError("need at least two samples for a standard error")
    x = as_vector(x, A_tilde.n, "x")
    xhat = as_vector(xhat, A_tilde.n, "xhat")
    b_tilde = as_vector(b_tilde, A_tilde.m, "b")
    r = A_tilde.matvec(x) - b_tilde
    state = relaxed_greedy_state(r, A_tilde, theta)
    errs = np.empty(samples)
    cache: dict[int, float] = {}
    for s in range(samples):
        i = sample_greedy(state, rng)
        if i not in cache:
            cache[i] = one_step_error_sq(x, A_tilde, b_tilde, xhat, i)
        errs[s] = cache[i]
    return float(errs.mean()), float(errs.std(ddof=1) / math.sqrt(samples))


def exact_one_step(A_tilde: RowMatrix, b_tilde, x, xhat, theta: float) -> float:
    """Exact ``E ||x_{k+1} - xhat||^2`` by summing over the candidate set."""
    x = as_vector(x, A_tilde.n, "x")
    xhat = as_vector(xhat, A_tilde.n, "xhat")
    b_tilde = as_vector(b_tilde, A_tilde.m, "b")
    r = A_tilde.matvec(x) - b_tilde
    state = relaxed_greedy_state(r, A_tilde, theta)
    U = state.candidates
    w = r[U] ** 2
    vals = np.array([one_step_error_sq(x, A_tilde, b_tilde, xhat, int(i)) for i in U])
    return float(w @ vals / w.sum())
