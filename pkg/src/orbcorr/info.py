"""Entropies, pairwise mutual information and the scalar L1 / gamma metrics.

All logarithms are natural (nats). L1 is a ratio and does not depend on the
base.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from orbcorr.errors import ConsistencyError, NormalizationError, PSDViolationError, UndefinedMetricError
from orbcorr.trace import (
    OneBodyRDM,
    PairDensityMatrix,
    SingleDensityMatrix,
    _gram4,
    _group_pair,
    occupation_probabilities,
    one_body_rdm,
    pair_density_matrix,
)
from orbcorr.wfncore import SparseWavefunction

ENTROPY_UNIT = "nats"
EIGEN_CLAMP = 1e-12
TOP_QUBITS = 100
# total quantum MI at or below this is treated as zero (no L1)
L1_ZERO_THRESHOLD = 1e-14


def _as_matrix(dm) -> np.ndarray:
    if isinstance(dm, (PairDensityMatrix, SingleDensityMatrix)):
        return dm.m
    return np.asarray(dm, dtype=np.float64)


def _xlogx_sum(p: np.ndarray) -> float:
    p = p[p > 0.0]
    return float(-np.sum(p * np.log(p)))


def von_neumann_entropy(dm) -> float:
    """``-tr(rho ln rho)``; eigenvalues within 1e-12 below zero are clamped."""
    m = _as_matrix(dm)
    tr = float(np.trace(m))
    if abs(tr - 1.0) > 1e-6:
        raise NormalizationError(f"density matrix trace {tr!r} deviates from 1")
    lam = np.linalg.eigvalsh(0.5 * (m + m.T))
    if lam.min() < -EIGEN_CLAMP:
        raise PSDViolationError(f"eigenvalue {lam.min():.3e} below -{EIGEN_CLAMP}")
    return _xlogx_sum(np.clip(lam, 0.0, 1.0))


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    total = float(np.sum(p))
    if abs(total - 1.0) > 1e-6:
        raise NormalizationError(f"probabilities sum to {total!r}")
    if p.min(initial=0.0) < -EIGEN_CLAMP:
        raise NormalizationError(f"negative probability {p.min():.3e}")
    return _xlogx_sum(np.clip(p, 0.0, 1.0))


def measurement_channel(dm) -> np.ndarray:
    """Projective measurement in the computational basis: keep the diagonal."""
    m = _as_matrix(dm)
    return np.diag(np.diag(m))


def dephase_qubit(dm, which: int) -> np.ndarray:
    """Measure one qubit of a 4x4 pair matrix (``which`` = 0 for the first bit,
    1 for the second); coherences that flip that bit are discarded."""
    m = np.array(_as_matrix(dm), dtype=np.float64)
    bits = np.arange(4)
    b = (bits >> (1 - which)) & 1
    m[b[:, None] != b[None, :]] = 0.0
    return m


def pair_mutual_information(m: np.ndarray) -> float:
    """``S(A) + S(B) - S(AB)`` of a 4x4 two-qubit matrix, von Neumann entropies."""
    t = m.reshape(2, 2, 2, 2)
    rho_a = np.einsum("ijkj->ik", t)
    rho_b = np.einsum("ijil->jl", t)
    return von_neumann_entropy(rho_a) + von_neumann_entropy(rho_b) - von_neumann_entropy(m)


def classical_mutual_information(joint) -> float:
    """Shannon mutual information of a 4-vector joint distribution over ``(b_i, b_j)``."""
    p = np.asarray(joint, dtype=np.float64).reshape(2, 2)
    return shannon_entropy(p.sum(axis=1)) + shannon_entropy(p.sum(axis=0)) - shannon_entropy(p)


def _pair_values(wfn: SparseWavefunction, i: int, j: int):
    m = _gram4(_group_pair(wfn, i, j))
    p = np.diag(m)
    # marginals come from m, so single-qubit coherences are kept when present
    quantum = pair_mutual_information(m)
    # classical marginals from the same joint distribution
    classical = classical_mutual_information(p)
    return quantum, classical


def _binary_entropy(p1: float) -> float:
    return shannon_entropy([max(1.0 - p1, 0.0), p1])


def mutual_information_pair(wfn: SparseWavefunction, i: int, j: int) -> tuple[float, float]:
    """``(I_vN, I_Sh)`` for qubits ``i`` and ``j``."""
    a, b = min(i, j), max(i, j)
    dm = pair_density_matrix(wfn, a, b)
    quantum = pair_mutual_information(dm.m)
    classical = classical_mutual_information(dm.diagonal)
    return quantum, classical


@dataclass(frozen=True)
class MutualInformationMatrix:
    """Symmetric quantum and classical MI matrices; the diagonal is NaN."""

    n: int
    quantum: np.ndarray
    classical: np.ndarray

    def upper(self):
        """Values over pairs ``i < j`` in row-major order."""
        iu = np.triu_indices(self.n, k=1)
        return self.quantum[iu], self.classical[iu]


def _pairs(n: int):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def mutual_information_matrix(wfn: SparseWavefunction, workers: int = 1) -> MutualInformationMatrix:
    """Quantum and classical MI for every pair.

    Pairs are independent; with ``workers > 1`` they are spread over a thread
    pool. Each pair is computed by the same code path whatever the pool size,
    so results are bitwise identical for any ``workers``.
    """
    n = wfn.n_qubits
    pairs = _pairs(n)

    def work(pair):
        return _pair_values(wfn, *pair)

    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(work, pairs))
    else:
        values = [work(p) for p in pairs]
    quantum = np.full((n, n), np.nan)
    classical = np.full((n, n), np.nan)
    for (i, j), (q, c) in zip(pairs, values):
        quantum[i, j] = quantum[j, i] = q
        classical[i, j] = classical[j, i] = c
    return MutualInformationMatrix(n, quantum, classical)


def l1_metric(mi: MutualInformationMatrix) -> float:
    """Percentage of the total pairwise quantum MI not captured classically."""
    q, c = mi.upper()
    total = float(np.sum(q))
    if not total > L1_ZERO_THRESHOLD:
        raise UndefinedMetricError("L1 undefined: quantum mutual information vanishes for every pair")
    return 100.0 * float(np.sum(q - c)) / total


def gamma_metric(rdm, n_electrons: int) -> float:
    """Sum of absolute off-diagonal 1-RDM entries per electron."""
    m = rdm.m if isinstance(rdm, OneBodyRDM) else np.asarray(rdm, dtype=np.float64)
    tr = float(np.trace(m))
    if n_electrons < 1:
        raise ConsistencyError("gamma needs at least one electron")
    if abs(tr - n_electrons) > 1e-6:
        raise ConsistencyError(f"RDM trace {tr!r} does not match {n_electrons} electrons")
    off = np.abs(m).sum() - np.abs(np.diag(m)).sum()
    return float(off) / n_electrons


@dataclass
class CorrelationReport:
    mi: MutualInformationMatrix
    entropies_vn: np.ndarray
    entropies_sh: np.ndarray
    l1_percent: float | None
    gamma: float | None
    sorted_mi_quantum: np.ndarray
    sorted_mi_classical: np.ndarray
    mi_difference: np.ndarray
    sorted_entropy: np.ndarray
    sorted_entropy_classical: np.ndarray
    entropy_difference: np.ndarray
    top_entropy_qubits: list[int]
    chi: int
    unit: str = ENTROPY_UNIT
    warnings: list[str] = field(default_factory=list)


def top_entropy_qubits(entropies, count: int = TOP_QUBITS) -> list[int]:
    """Indices of the largest entropies, ties by ascending index."""
    s = np.asarray(entropies)
    order = np.lexsort((np.arange(s.size), -s))
    return [int(k) for k in order[: min(count, s.size)]]


def build_report(wfn: SparseWavefunction, workers: int = 1) -> CorrelationReport:
    warnings = []
    mi = mutual_information_matrix(wfn, workers=workers)
    p1 = occupation_probabilities(wfn)
    # single-qubit matrices are diagonal, so both entropies come from p1
    s_vn = np.array([von_neumann_entropy(np.diag([max(1.0 - p, 0.0), p])) for p in p1])
    s_sh = np.array([_binary_entropy(p) for p in p1])
    try:
        l1 = l1_metric(mi)
    except UndefinedMetricError as exc:
        l1 = None
        warnings.append(str(exc))
    gamma = None
    if wfn.is_number_conserving() and len(wfn):
        rdm = one_body_rdm(wfn)
        n_e = int(round(float(np.trace(rdm.m))))
        if n_e >= 1:
            gamma = gamma_metric(rdm, n_e)
    else:
        warnings.append("gamma not computed: wavefunction does not conserve particle number")
    q, c = mi.upper()
    sq = -np.sort(-q)
    sc = -np.sort(-c)
    se = -np.sort(-s_vn)
    ss = -np.sort(-s_sh)
    return CorrelationReport(
        mi=mi,
        entropies_vn=s_vn,
        entropies_sh=s_sh,
        l1_percent=l1,
        gamma=gamma,
        sorted_mi_quantum=sq,
        sorted_mi_classical=sc,
        mi_difference=sc - sq,
        sorted_entropy=se,
        sorted_entropy_classical=ss,
        entropy_difference=ss - se,
        top_entropy_qubits=top_entropy_qubits(s_vn),
        chi=len(wfn),
        warnings=warnings,
    )
