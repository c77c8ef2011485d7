"""Ground-truth systems and their noisy measurements.

Additive model::

    A^j = A + sigma_e * E^j,    b^j = b + sigma_eps * eps^j,    j = 1..N

with ``E^j`` and ``eps^j`` i.i.d. standard normal.  The sigmas are absolute
standard deviations per entry.  Measurement ``j`` is drawn from the stream
``seeds.generator(spec.seed, j)`` (matrix noise first, then vector noise), so
any single measurement can be regenerated on its own and ensembles of
different sizes built from the same seed share their leading measurements.

Multiplicative model::

    A_tilde = (I_m + E) A (I_n + F) = A + dA,   dA = E A + A F + E A F
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import seeds
from .errors import ContractError, GenerationError
from .matrix import RowMatrix, as_vector, min_singular_value

ADDITIVE = "additive"
MULTIPLICATIVE = "multiplicative"

_MAX_SINGULAR_DRAWS = 16
_NONSINGULAR_THRESHOLD = 1e-8


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = ADDITIVE
    sigma_e: float = 0.01
    sigma_eps: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (ADDITIVE, MULTIPLICATIVE):
            raise ContractError(f"unknown noise kind {self.kind!r}")
        for name in ("sigma_e", "sigma_eps"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ContractError(f"{name} must be finite and non-negative, got {v}")


@dataclass(frozen=True)
class GroundTruth:
    """Exact consistent system ``A xhat = b``."""

    A: RowMatrix
    xhat: np.ndarray
    b: np.ndarray

    @classmethod
    def from_matrix(cls, A: RowMatrix, xhat) -> "GroundTruth":
        xhat = as_vector(xhat, A.n, "xhat")
        return cls(A, xhat, A.matvec(xhat))

    @property
    def shape(self):
        return self.A.shape


def generate_gaussian_ground_truth(m: int, n: int, seed: int,
                                   normalize_rows: bool = False) -> GroundTruth:
    """Gaussian ``A`` (m x n) and ``xhat`` (n), with ``b = A xhat``.

    ``normalize_rows`` rescales every row of ``A`` to unit Euclidean norm.
    """
    if m < 1 or n < 1:
        raise ContractError(f"dimensions must be positive, got {m}x{n}")
    rng = seeds.generator(seed)
    A = rng.standard_normal((m, n))
    xhat = rng.standard_normal(n)
    if normalize_rows:
        A /= np.linalg.norm(A, axis=1, keepdims=True)
    return GroundTruth.from_matrix(RowMatrix.from_dense(A), xhat)


def random_solution(A: RowMatrix, seed: int) -> GroundTruth:
    """Ground truth for a fixed matrix with a Gaussian ``xhat``."""
    return GroundTruth.from_matrix(A, seeds.generator(seed).standard_normal(A.n))


def _dense(A: RowMatrix) -> np.ndarray:
    return A.dense if A.dense is not None else A.to_dense()


def draw_measurement(gt: GroundTruth, spec: NoiseSpec, j: int):
    """Measurement ``j`` (1-based) of the additive model as ``(A^j, b^j)`` arrays.

    Zero sigmas skip the draw and return exact copies.
    """
    m, n = gt.A.shape
    rng = seeds.generator(spec.seed, j)
    if spec.sigma_e > 0:
        Aj = _dense(gt.A) + spec.sigma_e * rng.standard_normal((m, n))
    else:
        Aj = None
    if spec.sigma_eps > 0:
        bj = gt.b + spec.sigma_eps * rng.standard_normal(m)
    else:
        bj = gt.b.copy()
    return Aj, bj


class _LazyMeasurements(Sequence):
    """Measurements regenerated on access; storing N dense copies is too costly."""

    def __init__(self, gt, spec, N):
        self._gt, self._spec, self._N = gt, spec, N

    def __len__(self):
        return self._N

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return [self[i] for i in range(*idx.indices(self._N))]
        if idx < 0:
            idx += self._N
        if not 0 <= idx < self._N:
            raise IndexError(idx)
        Aj, bj = draw_measurement(self._gt, self._spec, idx + 1)
        A = self._gt.A if Aj is None else RowMatrix.from_dense(Aj, allow_zero_rows=True)
        return A, bj


@dataclass
class MeasurementEnsemble:
    """N additive measurements of one ground truth plus their averages.

    ``measurements[j]`` (0-based) is regenerated from its seed on access.
    """

    N: int
    abar: RowMatrix
    bbar: np.ndarray
    spec: NoiseSpec
    measurements: Sequence = field(repr=False)

    @property
    def sigma_e(self) -> float:
        return self.spec.sigma_e

    @property
    def sigma_eps(self) -> float:
        return self.spec.sigma_eps

    def fingerprint(self) -> str:
        """Hash of the averaged system, for checking paired designs."""
        import hashlib
        h = hashlib.sha256()
        if self.abar.dense is not None:
            h.update(self.abar.dense.tobytes())
        else:
            for arr in (self.abar.indptr, self.abar.indices, self.abar.data):
                h.update(arr.tobytes())
        h.update(self.bbar.tobytes())
        return h.hexdigest()


def make_additive_ensembles(gt: GroundTruth, Ns, spec: NoiseSpec) -> dict[int, MeasurementEnsemble]:
    """Ensembles for several sizes from one pass over the measurement streams.

    The running sums are snapshotted at each requested ``N``; the result for a
    given ``N`` is bit-identical to ``make_additive_ensemble(gt, N, spec)``.
    """
    if spec.kind != ADDITIVE:
        raise ContractError("additive ensembles need an additive NoiseSpec")
    wanted = sorted({int(N) for N in Ns})
    if not wanted or wanted[0] < 1:
        raise ContractError("ensemble size N must be at least 1")
    m, n = gt.A.shape
    sum_a = np.zeros((m, n)) if spec.sigma_e > 0 else None
    sum_b = np.zeros(m)
    out = {}
    for j in range(1, wanted[-1] + 1):
        Aj, bj = draw_measurement(gt, spec, j)
        if sum_a is not None:
            sum_a += Aj
        sum_b += bj
        if j in wanted:
            out[j] = _finish(gt, spec, j, sum_a, sum_b)
    return out


def make_additive_ensemble(gt: GroundTruth, N: int, spec: NoiseSpec) -> MeasurementEnsemble:
    """Signal-averaged ensemble of ``N`` additive measurements."""
    return make_additive_ensembles(gt, [N], spec)[int(N)]


def _finish(gt, spec, N, sum_a, sum_b):
    if sum_a is None:
        abar = gt.A
    else:
        avg = sum_a / N
        try:
            abar = RowMatrix.from_dense(avg)
        except ContractError as exc:
            raise GenerationError(f"averaged matrix has a zero row: {exc}") from exc
    # exact copies average to b only up to rounding; keep b itself
    bbar = gt.b.copy() if spec.sigma_eps == 0 else sum_b / N
    return MeasurementEnsemble(N=N, abar=abar, bbar=bbar, spec=spec,
                               measurements=_LazyMeasurements(gt, spec, N))


def noise_offset_norm(gt: GroundTruth, E, eps) -> float:
    """``||E xhat - eps||``, the noise term of the convergence horizon."""
    if isinstance(E, RowMatrix):
        if E.shape != gt.A.shape:
            raise ContractError(f"noise matrix shape {E.shape} != {gt.A.shape}")
        ex = E.matvec(gt.xhat)
    else:
        E = np.asarray(E, dtype=np.float64)
        if E.shape != gt.A.shape:
            raise ContractError(f"noise matrix shape {E.shape} != {gt.A.shape}")
        ex = E @ gt.xhat
    eps = as_vector(eps, gt.A.m, "eps")
    return float(np.linalg.norm(ex - eps))


def noise_of(gt: GroundTruth, A_noisy: RowMatrix, b_noisy) -> tuple[RowMatrix, np.ndarray]:
    """Recover ``(E, eps)`` with ``A_noisy = A + E`` and ``b_noisy = b + eps``."""
    if A_noisy.shape != gt.A.shape:
        raise ContractError("noisy matrix shape differs from the ground truth")
    E = RowMatrix.from_dense(_dense(A_noisy) - _dense(gt.A), allow_zero_rows=True)
    return E, as_vector(b_noisy, gt.A.m, "b") - gt.b


@dataclass(frozen=True)
class MultiplicativePerturbation:
    E: RowMatrix
    F: RowMatrix
    deltaA: RowMatrix


def multiplicative_system(gt: GroundTruth, E, F):
    """``(A_tilde, perturbation)`` for explicit factors ``E`` (m x m), ``F`` (n x n)."""
    m, n = gt.A.shape
    E = np.asarray(E, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    if E.shape != (m, m) or F.shape != (n, n):
        raise ContractError(f"E must be {m}x{m} and F {n}x{n}")
    A = _dense(gt.A)
    At = (np.eye(m) + E) @ A @ (np.eye(n) + F)
    pert = MultiplicativePerturbation(
        E=RowMatrix.from_dense(E, allow_zero_rows=True),
        F=RowMatrix.from_dense(F, allow_zero_rows=True),
        deltaA=RowMatrix.from_dense(At - A, allow_zero_rows=True),
    )
    return RowMatrix.from_dense(At), pert


def make_multiplicative_noisy(gt: GroundTruth, spec: NoiseSpec, seed: int):
    """Draw ``A_tilde = (I+E) A (I+F)`` and ``b_tilde = b + sigma_eps * eps``.

    ``E`` and ``F`` have i.i.d. normal entries with standard deviation
    ``spec.sigma_e``.  Draws where ``I+E`` or ``I+F`` is numerically singular
    are rejected and redrawn from the next attempt's stream.

    Returns
    -------
    A_tilde : RowMatrix
    b_tilde : ndarray
    perturbation : MultiplicativePerturbation
    """
    if spec.kind != MULTIPLICATIVE:
        raise ContractError("multiplicative noise needs a multiplicative NoiseSpec")
    m, n = gt.A.shape
    for attempt in range(_MAX_SINGULAR_DRAWS):
        rng = seeds.generator(seed, attempt)
        E = spec.sigma_e * rng.standard_normal((m, m))
        F = spec.sigma_e * rng.standard_normal((n, n))
        eps = rng.standard_normal(m)
        if (_smin(np.eye(m) + E) > _NONSINGULAR_THRESHOLD
                and _smin(np.eye(n) + F) > _NONSINGULAR_THRESHOLD):
            At, pert = multiplicative_system(gt, E, F)
            return At, gt.b + spec.sigma_eps * eps, pert
    raise GenerationError(f"{_MAX_SINGULAR_DRAWS} consecutive singular draws of I+E / I+F")


def _smin(M):
    return min_singular_value(RowMatrix.from_dense(M, allow_zero_rows=True))
