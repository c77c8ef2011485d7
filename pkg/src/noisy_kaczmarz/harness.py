"""Multi-trial experiments with median statistics.

Every trial draws its own system from seeds derived from ``(base_seed,
trial)``, and all configurations of a trial share that draw (paired design).
Measurement 1 of the trial's ensemble is the noisy system seen by RK and
RGRK; RGRK-SA with ``N`` measurements averages measurements ``1..N`` of the
same stream.  Solver randomness uses ``sub_seed(base_seed, trial, 3, config)``
so running trials concurrently, or in any order, cannot change a result.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import seeds
from .errors import ContractError
from .io import load_matrix_market
from .matrix import RowMatrix
from .noise import (ADDITIVE, MULTIPLICATIVE, GroundTruth, NoiseSpec,
                    generate_gaussian_ground_truth, make_additive_ensembles,
                    make_multiplicative_noisy, random_solution)
from .solvers import METHODS, RGRK, RGRK_SA, RK, SolverConfig, WorkingSystem, solve

GRK_NOTE = "GRK-equivalent"

# key slots for sub_seed(base_seed, trial, slot, ...)
_SYSTEM, _SOLUTION, _NOISE, _SOLVER = 0, 1, 2, 3


@dataclass(frozen=True)
class GaussianSource:
    m: int
    n: int
    normalize_rows: bool = False

    @property
    def label(self) -> str:
        return f"gaussian-{self.m}x{self.n}"


@dataclass(frozen=True)
class MatrixMarketSource:
    path: str
    name: Optional[str] = None

    @property
    def label(self) -> str:
        return self.name or Path(self.path).name.split(".")[0]


Source = Union[GaussianSource, MatrixMarketSource]


@dataclass(frozen=True)
class MethodConfig:
    """One solver configuration; ``N`` is the measurement count (1 unless averaging)."""

    method: str
    theta: float = 1.0
    N: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ContractError(f"unknown method {self.method!r}")
        if not 0.0 <= self.theta <= 1.0:
            raise ContractError(f"theta must lie in [0, 1], got {self.theta}")
        if self.N < 1:
            raise ContractError("N must be at least 1")
        if self.method != RGRK_SA and self.N != 1:
            raise ContractError(f"{self.method} uses a single measurement; N must be 1")

    @property
    def note(self) -> str:
        return GRK_NOTE if self.method != RK and self.theta == 0.5 else ""


DEFAULT_COMPARISON = (
    MethodConfig(RK, 1.0, 1),
    MethodConfig(RGRK, 0.5, 1),
    MethodConfig(RGRK, 1.0, 1),
    MethodConfig(RGRK_SA, 0.5, 20),
    MethodConfig(RGRK_SA, 1.0, 20),
)


@dataclass(frozen=True)
class ExperimentSpec:
    source: Source
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    methods: tuple = ()
    trials: int = 50
    max_iterations: int = 4000
    stop_tolerance: float = 1e-1
    base_seed: int = 0
    refresh_period: int = 50
    keep_curves: bool = False

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.trials < 1:
            raise ContractError("trials must be at least 1")
        if self.max_iterations < 1:
            raise ContractError("max_iterations must be at least 1")
        if not self.stop_tolerance > 0:
            raise ContractError("stop_tolerance must be positive")
        for mc in self.methods:
            if not isinstance(mc, MethodConfig):
                raise ContractError(f"methods must hold MethodConfig entries, got {mc!r}")
            if self.noise.kind == MULTIPLICATIVE and mc.N != 1:
                raise ContractError("multiplicative noise supports single measurements only")


@dataclass
class TrialSummary:
    """Medians over trials for one configuration; per-trial arrays are kept."""

    method: str
    theta: float
    N: int
    matrix: str
    trials: int
    median_final_error: float
    median_iterations: float
    median_cpu_seconds: float
    per_trial_final_errors: np.ndarray
    per_trial_iterations: np.ndarray
    per_trial_cpu_seconds: np.ndarray
    per_trial_reasons: list
    fingerprints: list
    note: str = ""
    error: Optional[str] = None
    median_curve: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def config(self) -> MethodConfig:
        return MethodConfig(self.method, self.theta, self.N)

    def same_results(self, other: "TrialSummary") -> bool:
        """Equality of everything except timing."""
        return (
            (self.method, self.theta, self.N, self.matrix, self.trials, self.error)
            == (other.method, other.theta, other.N, other.matrix, other.trials, other.error)
            and np.array_equal(self.per_trial_final_errors, other.per_trial_final_errors,
                               equal_nan=True)
            and np.array_equal(self.per_trial_iterations, other.per_trial_iterations)
            and self.fingerprints == other.fingerprints
        )


def median(values) -> float:
    """Central order statistic, or the mean of the two central ones for even counts."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ContractError("median of an empty list")
    return float(np.median(arr))


def _fingerprint(A: RowMatrix, b: np.ndarray) -> str:
    import hashlib
    h = hashlib.sha256()
    if A.dense is not None:
        h.update(A.dense.tobytes())
    else:
        for arr in (A.indptr, A.indices, A.data):
            h.update(arr.tobytes())
    h.update(b.tobytes())
    return h.hexdigest()[:16]


def _trial_truth(spec: ExperimentSpec, t: int, fixed: Optional[RowMatrix]) -> GroundTruth:
    if isinstance(spec.source, GaussianSource):
        src = spec.source
        return generate_gaussian_ground_truth(src.m, src.n,
                                              seeds.sub_seed(spec.base_seed, t, _SYSTEM),
                                              normalize_rows=src.normalize_rows)
    return random_solution(fixed, seeds.sub_seed(spec.base_seed, t, _SOLUTION))


def _trial_systems(spec: ExperimentSpec, gt: GroundTruth, t: int) -> dict[int, tuple]:
    """Working ``(A, b)`` per measurement count needed by the configurations."""
    noise_seed = seeds.sub_seed(spec.base_seed, t, _NOISE)
    if spec.noise.kind == MULTIPLICATIVE:
        At, bt, _ = make_multiplicative_noisy(gt, spec.noise, noise_seed)
        return {1: (At, bt)}
    nspec = replace(spec.noise, seed=noise_seed)
    ens = make_additive_ensembles(gt, sorted({mc.N for mc in spec.methods}), nspec)
    return {N: (e.abar, e.bbar) for N, e in ens.items()}


def run_trial(spec: ExperimentSpec, t: int, fixed: Optional[RowMatrix] = None) -> list:
    """All configurations of trial ``t``.

    Returns one tuple per configuration:
    ``(final_error, iterations, cpu_seconds, reason, fingerprint, curve, error)``.
    """
    gt = _trial_truth(spec, t, fixed)
    systems = _trial_systems(spec, gt, t)
    out = []
    for c, mc in enumerate(spec.methods):
        A, b = systems[mc.N]
        fp = _fingerprint(A, b)
        cfg = SolverConfig(method=mc.method, theta=mc.theta,
                           max_iterations=spec.max_iterations,
                           stop_tolerance=spec.stop_tolerance,
                           seed=seeds.sub_seed(spec.base_seed, t, _SOLVER, c),
                           refresh_period=spec.refresh_period)
        try:
            tr = solve(WorkingSystem(A, b, gt), cfg)
        except (ContractError, ArithmeticError, RuntimeError) as exc:
            out.append((math.nan, math.nan, math.nan, "error", fp, None,
                        f"trial {t}: {type(exc).__name__}: {exc}"))
            continue
        curve = tr.relative_error.copy() if spec.keep_curves else None
        out.append((tr.final_error, float(tr.iterations), tr.cpu_seconds,
                    tr.termination_reason, fp, curve, None))
    return out


def _run_trial_job(args):
    spec, t, fixed = args
    return run_trial(spec, t, fixed)


def _median_curve(curves, length):
    # runs that stopped early keep their last iterate
    padded = np.empty((len(curves), length))
    for row, c in zip(padded, curves):
        row[:c.size] = c
        row[c.size:] = c[-1]
    return np.median(padded, axis=0)


def _error_summaries(spec: ExperimentSpec, label: str, message: str) -> list:
    nan = np.full(spec.trials, np.nan)
    return [TrialSummary(mc.method, mc.theta, mc.N, label, spec.trials, math.nan, math.nan,
                         math.nan, nan.copy(), nan.copy(), nan.copy(), [], [], mc.note, message)
            for mc in spec.methods]


def run_trials(spec: ExperimentSpec, jobs: int = 1) -> list:
    """Run every configuration for ``spec.trials`` trials and aggregate medians.

    A failing configuration yields a summary with ``error`` set and NaN
    medians; the remaining configurations are unaffected.
    """
    if not spec.methods:
        raise ContractError("experiment has no method configurations")
    label = spec.source.label
    fixed = None
    if isinstance(spec.source, MatrixMarketSource):
        try:
            fixed = load_matrix_market(spec.source.path, allow_zero_rows=False)
        except (ContractError, OSError, ValueError) as exc:
            return _error_summaries(spec, label, f"loading {spec.source.path}: {exc}")
    work = [(spec, t, fixed) for t in range(spec.trials)]
    if jobs > 1 and spec.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_trial_job, work))
    else:
        results = [_run_trial_job(w) for w in work]

    summaries = []
    for c, mc in enumerate(spec.methods):
        rows = [res[c] for res in results]
        errs = np.array([r[0] for r in rows])
        iters = np.array([r[1] for r in rows])
        cpu = np.array([r[2] for r in rows])
        failures = [r[6] for r in rows if r[6] is not None]
        curve = None
        if spec.keep_curves and not failures:
            curve = _median_curve([r[5] for r in rows], spec.max_iterations + 1)
        summaries.append(TrialSummary(
            method=mc.method, theta=mc.theta, N=mc.N, matrix=label, trials=spec.trials,
            median_final_error=math.nan if failures else median(errs),
            median_iterations=math.nan if failures else median(iters),
            median_cpu_seconds=math.nan if failures else median(cpu),
            per_trial_final_errors=errs, per_trial_iterations=iters,
            per_trial_cpu_seconds=cpu, per_trial_reasons=[r[3] for r in rows],
            fingerprints=[r[4] for r in rows], note=mc.note,
            error="; ".join(failures) if failures else None, median_curve=curve,
        ))
    return summaries


def theta_sweep(spec: ExperimentSpec, thetas: Sequence[float], n_meas: int = 10,
                methods: Sequence[str] = (RGRK, RGRK_SA), jobs: int = 1) -> list:
    """One summary per ``theta`` for each requested method (RGRK-SA at ``n_meas``)."""
    thetas = [float(t) for t in thetas]
    if not thetas:
        raise ContractError("theta list is empty")
    configs = []
    for method in methods:
        if method not in (RGRK, RGRK_SA):
            raise ContractError(f"theta sweep covers rgrk and rgrk-sa, not {method!r}")
        for th in thetas:
            configs.append(MethodConfig(method, th, n_meas if method == RGRK_SA else 1))
    return run_trials(replace(spec, methods=tuple(configs)), jobs=jobs)


def n_sweep(spec: ExperimentSpec, Ns: Sequence[int], theta: float = 1.0, jobs: int = 1) -> list:
    """RGRK-SA summaries for each measurement count ``N``."""
    configs = tuple(MethodConfig(RGRK_SA, theta, int(N)) for N in Ns)
    return run_trials(replace(spec, methods=configs), jobs=jobs)


def compare_methods(spec: ExperimentSpec, jobs: int = 1) -> list:
    """Paired comparison; uses RK, RGRK(0.5, 1) and RGRK-SA(0.5, 1; N=20) by default."""
    if not spec.methods:
        spec = replace(spec, methods=DEFAULT_COMPARISON)
    return run_trials(spec, jobs=jobs)


class MedianCurve:
    """Median relative-error curve shaped for :func:`io.write_trace_csv`."""

    def __init__(self, curve: np.ndarray):
        self.relative_error = curve
        self.residual_norm = np.full(curve.size, np.nan)
        self.elapsed_seconds = np.full(curve.size, np.nan)


def median_curve_entries(summaries, base_seed: int = 0) -> list:
    """Trace entries (run ``median``) for summaries that kept their curves."""
    from .io import TraceEntry
    return [TraceEntry(f"median-{s.matrix}", s.method, s.theta, s.N, base_seed,
                       MedianCurve(s.median_curve))
            for s in summaries if s.median_curve is not None]
