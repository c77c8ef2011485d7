"""Kaczmarz iterations: RK, relaxed greedy (RGRK) and signal-averaged RGRK.

All three share one loop (compiled or numpy, see ``_backend``).  Per
iteration the loop keeps the residual ``r = A x - b`` up to date with one
product ``A a_i``, and recomputes it from scratch every ``refresh_period``
steps to bound floating-point drift.  Row selection consumes one uniform
from a PCG64 stream seeded by ``SolverConfig.seed``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple, Optional

import numpy as np

from . import _backend, _fallback, seeds
from .errors import ContractError
from .matrix import RowMatrix, as_vector, residual
from .noise import GroundTruth, MeasurementEnsemble

RK = "rk"
RGRK = "rgrk"
RGRK_SA = "rgrk-sa"
METHODS = (RK, RGRK, RGRK_SA)

TOLERANCE_REACHED = "toleranceReached"
MAX_ITERATIONS = "maxIterations"
STATIONARY = "stationary"
_REASONS = {
    _fallback.REASON_TOL: TOLERANCE_REACHED,
    _fallback.REASON_MAXITER: MAX_ITERATIONS,
    _fallback.REASON_STATIONARY: STATIONARY,
}

DRIFT_RTOL = 1e-8


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters.

    ``stop_tolerance`` applies to the relative error when ``track_error`` is
    set and to ``||A x - b|| / ||b||`` otherwise.  ``maximal_correction``
    turns ``theta = 1`` greedy sampling into the deterministic argmax rule.
    """

    method: str = RGRK
    theta: float = 1.0
    max_iterations: int = 4000
    stop_tolerance: float = 1e-1
    seed: int = 0
    refresh_period: int = 50
    track_error: bool = True
    maximal_correction: bool = False
    x0: Optional[np.ndarray] = None
    record_iterates: bool = False
    backend: Optional[str] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ContractError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not 0.0 <= self.theta <= 1.0:
            raise ContractError(f"theta must lie in [0, 1], got {self.theta}")
        if self.max_iterations < 1:
            raise ContractError("max_iterations must be at least 1")
        if not self.stop_tolerance > 0:
            raise ContractError("stop_tolerance must be positive")
        if self.refresh_period < 1:
            raise ContractError("refresh_period must be at least 1")
        if self.maximal_correction and self.theta != 1.0:
            raise ContractError("maximal correction is the theta = 1 rule")


class TraceRecord(NamedTuple):
    k: int
    selected_index: int
    relative_error: float
    residual_norm: float
    elapsed_seconds: float


@dataclass
class IterateTrace:
    """Per-iterate history of one run.

    Entry ``k`` describes ``x_k``; ``selected_index[k]`` is the row used to
    move from ``x_k`` to ``x_{k+1}`` and is -1 on the last entry.
    ``relative_error`` is NaN when the run had no ground truth.
    """

    selected_index: np.ndarray
    relative_error: np.ndarray
    residual_norm: np.ndarray
    elapsed_seconds: np.ndarray
    final_x: np.ndarray
    termination_reason: str
    stop_criterion: str
    cpu_seconds: float
    max_residual_drift: float
    drift_flagged: bool
    iterates: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def iterations(self) -> int:
        return int(self.selected_index.size - 1)

    @property
    def final_error(self) -> float:
        return float(self.relative_error[-1])

    def records(self) -> Iterator[TraceRecord]:
        for k in range(self.selected_index.size):
            yield TraceRecord(k, int(self.selected_index[k]), float(self.relative_error[k]),
                              float(self.residual_norm[k]), float(self.elapsed_seconds[k]))

    def same_path(self, other: "IterateTrace") -> bool:
        """Bit-identical iterate history, ignoring timing."""
        return (
            np.array_equal(self.selected_index, other.selected_index)
            and np.array_equal(self.relative_error, other.relative_error, equal_nan=True)
            and np.array_equal(self.residual_norm, other.residual_norm)
            and np.array_equal(self.final_x, other.final_x)
            and self.termination_reason == other.termination_reason
        )


@dataclass(frozen=True)
class WorkingSystem:
    """The pair the solver sees (a noisy or averaged system) and optional truth."""

    A: RowMatrix
    b: np.ndarray
    truth: Optional[GroundTruth] = None

    def __post_init__(self):
        object.__setattr__(self, "b", as_vector(self.b, self.A.m, "b"))
        if np.any(self.A.row_norm_sq == 0.0):
            raise ContractError("working matrix has a zero row")
        if self.truth is not None and self.truth.A.n != self.A.n:
            raise ContractError("ground truth and working system differ in column count")


def kaczmarz_step(x, A: RowMatrix, b, i: int) -> np.ndarray:
    """Orthogonal projection of ``x`` onto ``{y : a_i^T y = b_i}``."""
    x = as_vector(x, A.n, "x")
    A._check_row(i)
    if A.row_norm_sq[i] == 0.0:
        raise ContractError(f"row {i} is zero")
    cols, vals = A.row_slice(i)
    beta = float(vals @ x[cols]) - float(b[i])
    out = x.copy()
    out[cols] -= (beta / A.row_norm_sq[i]) * vals
    return out


def relative_error(x, xhat) -> float:
    xhat = np.asarray(xhat, dtype=np.float64)
    nrm = float(np.linalg.norm(xhat))
    if nrm == 0.0:
        raise ContractError("relative error undefined for a zero reference")
    return float(np.linalg.norm(np.asarray(x, dtype=np.float64) - xhat)) / nrm


def _mode(cfg: SolverConfig) -> int:
    if cfg.method == RK:
        return _fallback.MODE_RK
    if cfg.maximal_correction:
        return _fallback.MODE_MAXCORR
    return _fallback.MODE_GREEDY


def _run(sys: WorkingSystem, cfg: SolverConfig) -> IterateTrace:
    A, b = sys.A, sys.b
    m, n = A.shape
    if cfg.track_error:
        if sys.truth is None:
            raise ContractError("track_error needs a ground truth; unset it for oracle-free runs")
        xhat = sys.truth.xhat
        if not np.any(xhat):
            raise ContractError("relative error undefined for a zero reference solution")
    else:
        xhat = np.zeros(n)
    x = np.zeros(n) if cfg.x0 is None else as_vector(cfg.x0, n, "x0").copy()
    r = residual(A, x, b)
    M = int(cfg.max_iterations)
    uniforms = seeds.generator(cfg.seed).random(M)
    out_idx = np.empty(M + 1, dtype=np.intp)
    out_err = np.empty(M + 1)
    out_res = np.empty(M + 1)
    out_time = np.empty(M + 1)
    x_hist = np.empty((M + 1, n) if cfg.record_iterates else (1, n))
    b_norm = float(np.linalg.norm(b))
    kernel = _backend.get(cfg.backend)
    common = (b, x, r, A.row_norm_sq, A.frob_sq, A.row_cdf, _mode(cfg), float(cfg.theta),
              uniforms, M, float(cfg.stop_tolerance), xhat, bool(cfg.track_error), b_norm,
              int(cfg.refresh_period), out_idx, out_err, out_res, out_time, x_hist,
              bool(cfg.record_iterates), time.perf_counter)
    cpu0 = time.process_time()
    if A.dense is not None:
        steps, reason, drift = kernel.run_dense(A.dense, *common)
    else:
        cp, ci, cd = A.csc()
        steps, reason, drift = kernel.run_csr(A.indptr, A.indices, A.data, cp, ci, cd, *common)
    cpu = time.process_time() - cpu0
    K = steps + 1
    return IterateTrace(
        selected_index=out_idx[:K].copy(),
        relative_error=out_err[:K].copy(),
        residual_norm=out_res[:K].copy(),
        elapsed_seconds=out_time[:K].copy(),
        final_x=x,
        termination_reason=_REASONS[reason],
        stop_criterion="relative_error" if cfg.track_error else "residual",
        cpu_seconds=cpu,
        max_residual_drift=float(drift),
        drift_flagged=bool(drift > DRIFT_RTOL * max(b_norm, math.ulp(1.0))),
        iterates=x_hist[:K].copy() if cfg.record_iterates else None,
    )


def solve_rk(sys: WorkingSystem, cfg: SolverConfig) -> IterateTrace:
    """Randomized Kaczmarz with rows drawn by squared norm."""
    if cfg.method != RK:
        raise ContractError(f"solve_rk needs method 'rk', got {cfg.method!r}")
    return _run(sys, cfg)


def solve_rgrk(sys: WorkingSystem, cfg: SolverConfig) -> IterateTrace:
    """Relaxed greedy randomized Kaczmarz on a single (noisy) system.

    With ``theta = 0.5`` this is the greedy randomized Kaczmarz rule.
    """
    if cfg.method != RGRK:
        raise ContractError(f"solve_rgrk needs method 'rgrk', got {cfg.method!r}")
    return _run(sys, cfg)


def solve_rgrk_sa(ensemble: MeasurementEnsemble, truth: Optional[GroundTruth],
                  cfg: SolverConfig) -> IterateTrace:
    """Relaxed greedy iterations on the averaged system ``(Abar, bbar)``.

    The averages are formed once when the ensemble is built, so each
    iteration costs the same as :func:`solve_rgrk`.
    """
    if cfg.method != RGRK_SA:
        raise ContractError(f"solve_rgrk_sa needs method 'rgrk-sa', got {cfg.method!r}")
    if np.any(ensemble.abar.row_norm_sq == 0.0):
        raise ContractError("averaged matrix has a zero row")
    return _run(WorkingSystem(ensemble.abar, ensemble.bbar, truth), cfg)


def solve(sys: WorkingSystem, cfg: SolverConfig) -> IterateTrace:
    """Run ``cfg.method`` on an already-assembled working system."""
    return _run(sys, cfg)


def with_method(cfg: SolverConfig, method: str, **changes) -> SolverConfig:
    return replace(cfg, method=method, **changes)
