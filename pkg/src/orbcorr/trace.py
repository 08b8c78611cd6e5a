"""Sparse partial traces onto one and two qubits, and the one-body RDM.

The pair kernel never forms a ``2^N`` object. For a pair ``(i, j)`` every term
is split into an environment key (the bitstring with bits ``i`` and ``j``
cleared) and a local two-bit index ``2*b_i + b_j``. Terms sharing a key form a
4-component amplitude vector ``v_e`` and the traced matrix is
``sum_e v_e v_e^T``. Environment keys come out of ``np.unique`` sorted, so the
reduction order (and hence every rounding) is independent of term order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from orbcorr.errors import ArgumentError, CapacityError, DimensionError, ModelError
from orbcorr.wfncore import WORD_BITS, SparseWavefunction

DENSE_MAX_QUBITS = 24
# fixed chunk size keeps all_pair_probabilities independent of worker count
_PROB_CHUNK = 4096


@dataclass(frozen=True)
class PairDensityMatrix:
    """Two-qubit traced density matrix in the basis ``|00>,|01>,|10>,|11>``,
    first bit = qubit ``i``."""

    i: int
    j: int
    m: np.ndarray

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.m).copy()


@dataclass(frozen=True)
class SingleDensityMatrix:
    i: int
    p0: float
    p1: float

    @property
    def m(self) -> np.ndarray:
        return np.diag([self.p0, self.p1])


@dataclass(frozen=True)
class OneBodyRDM:
    """Spin-orbital one-body reduced density matrix ``<a_k^dag a_l>``."""

    m: np.ndarray
    n_alpha: int
    n_beta: int

    @property
    def n_spin_orbitals(self) -> int:
        return self.m.shape[0]

    @property
    def n_electrons(self) -> int:
        return self.n_alpha + self.n_beta

    def spatial(self) -> np.ndarray:
        """Spin-traced ``M x M`` matrix (alpha block + beta block)."""
        mm = self.m.shape[0] // 2
        return self.m[:mm, :mm] + self.m[mm:, mm:]


def _check_qubit(wfn: SparseWavefunction, q: int) -> None:
    if not 0 <= q < wfn.n_qubits:
        raise DimensionError(f"qubit index {q} out of range 0..{wfn.n_qubits - 1}")


def _check_pair(wfn: SparseWavefunction, i: int, j: int) -> None:
    _check_qubit(wfn, i)
    _check_qubit(wfn, j)
    if i == j:
        raise ArgumentError(f"pair needs two distinct qubits, got ({i}, {j})")


def _mask_words(n_words: int, qubits) -> np.ndarray:
    mask = np.zeros(n_words, dtype=np.uint64)
    for q in qubits:
        mask[q // WORD_BITS] |= np.uint64(1) << np.uint64(q % WORD_BITS)
    return mask


def _group_pair(wfn: SparseWavefunction, i: int, j: int, amplitudes=None) -> np.ndarray:
    """Per-environment local amplitude vectors, shape ``(n_env, 4)``, rows in
    ascending environment-key order."""
    words = wfn.words
    amps = wfn.amplitudes if amplitudes is None else amplitudes
    local = (2 * wfn.bit(i) + wfn.bit(j)).astype(np.intp)
    env = words & ~_mask_words(words.shape[1], (i, j))
    if env.shape[1] == 1:
        _, inverse = np.unique(env[:, 0], return_inverse=True)
    else:
        _, inverse = np.unique(env, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    n_env = int(inverse.max()) + 1 if inverse.size else 0
    v = np.zeros((n_env, 4))
    # determinants are distinct, so (env, local) cells are hit at most once
    v[inverse, local] = amps
    return v


def _gram4(v: np.ndarray) -> np.ndarray:
    # explicit pairwise-summed reductions instead of BLAS: bitwise reproducible
    out = np.empty((4, 4))
    for a in range(4):
        for b in range(a, 4):
            out[a, b] = out[b, a] = np.sum(v[:, a] * v[:, b])
    return out


def pair_density_matrix(wfn: SparseWavefunction, i: int, j: int) -> PairDensityMatrix:
    """Trace ``|psi><psi|`` down to qubits ``i < j``.

    Costs O(chi log chi) time and O(#environments) memory.
    """
    _check_pair(wfn, i, j)
    if i > j:
        raise ArgumentError(f"expected i < j, got ({i}, {j})")
    return PairDensityMatrix(i, j, _gram4(_group_pair(wfn, i, j)))


def single_density_matrix(wfn: SparseWavefunction, i: int) -> SingleDensityMatrix:
    _check_qubit(wfn, i)
    occ = wfn.bit(i).astype(bool)
    weights = wfn.amplitudes**2
    p1 = float(np.sum(np.where(occ, weights, 0.0)))
    p0 = float(np.sum(np.where(occ, 0.0, weights)))
    return SingleDensityMatrix(i, p0, p1)


def occupation_probabilities(wfn: SparseWavefunction) -> np.ndarray:
    """``<n_q>`` for every qubit, i.e. the p1 of each single-qubit matrix."""
    weights = wfn.amplitudes**2
    out = np.empty(wfn.n_qubits)
    for q in range(wfn.n_qubits):
        out[q] = np.sum(np.where(wfn.bit(q).astype(bool), weights, 0.0))
    return out


def _occupation_block(wfn: SparseWavefunction, start: int, stop: int) -> np.ndarray:
    words = wfn.words[start:stop]
    cols = []
    for q in range(wfn.n_qubits):
        cols.append((words[:, q // WORD_BITS] >> np.uint64(q % WORD_BITS)) & np.uint64(1))
    return np.stack(cols, axis=1).astype(np.float64)


def all_pair_probabilities(wfn: SparseWavefunction) -> np.ndarray:
    """Joint occupation distribution of every qubit pair, shape ``(N, N, 4)``.

    Entry ``[i, j, 2*b_i + b_j]`` is the probability of finding qubits ``i, j``
    in ``(b_i, b_j)``; it is the diagonal of the pair's traced density matrix.
    One pass over the terms in fixed-size chunks. Entries with ``i == j`` are
    not meaningful.
    """
    n = wfn.n_qubits
    both = np.zeros((n, n))
    single = np.zeros(n)
    total = 0.0
    weights = wfn.amplitudes**2
    for start in range(0, len(wfn), _PROB_CHUNK):
        stop = min(start + _PROB_CHUNK, len(wfn))
        occ = _occupation_block(wfn, start, stop)
        w = weights[start:stop]
        both += occ.T @ (occ * w[:, None])
        single += w @ occ
        total += float(np.sum(w))
    out = np.empty((n, n, 4))
    out[:, :, 3] = both
    out[:, :, 2] = single[:, None] - both
    out[:, :, 1] = single[None, :] - both
    out[:, :, 0] = total - single[:, None] - single[None, :] + both
    return out


def _parity_between(wfn: SparseWavefunction, k: int, l: int) -> np.ndarray:
    """``(-1)^(number of occupied qubits strictly between k and l)`` per term."""
    lo, hi = min(k, l), max(k, l)
    mask = _mask_words(wfn.words.shape[1], range(lo + 1, hi))
    counts = np.bitwise_count(wfn.words & mask).sum(axis=1)
    return 1.0 - 2.0 * (counts & 1)


def one_body_rdm(wfn: SparseWavefunction) -> OneBodyRDM:
    """``rho[k, l] = <psi| a_k^dag a_l |psi>`` over spin-orbitals.

    The off-diagonal element pairs each determinant holding ``l`` (not ``k``)
    with its partner holding ``k`` (not ``l``), weighted by the fermionic sign
    ``(-1)^(occupied orbitals between k and l)``. Partners share an environment
    key of the ``(k, l)`` pair, so the same grouping as the pair kernel is reused
    with the sign folded into the amplitudes.
    """
    if not wfn.is_number_conserving():
        raise ModelError("one-body RDM requires a particle-number conserving wavefunction")
    n = wfn.n_qubits
    rho = np.zeros((n, n))
    rho[np.diag_indices(n)] = occupation_probabilities(wfn)
    sz = wfn.is_sz_conserving()
    half = n // 2
    for k in range(n):
        for l in range(k + 1, n):
            if sz and (k < half) != (l < half):
                continue  # alpha-beta block vanishes identically
            v = _group_pair(wfn, k, l)
            signs = _group_pair(wfn, k, l, _parity_between(wfn, k, l))
            # every nonzero row has a well defined sign; pick it from either slot
            s = np.where(signs[:, 1] != 0, signs[:, 1], signs[:, 2])
            rho[k, l] = rho[l, k] = float(np.sum(s * v[:, 2] * v[:, 1]))
    return OneBodyRDM(rho, wfn.n_alpha, wfn.n_beta)


def _annihilate(occ: int, q: int):
    if not occ >> q & 1:
        return None, 0
    sign = -1 if (occ & ((1 << q) - 1)).bit_count() & 1 else 1
    return occ ^ (1 << q), sign


def _create(occ: int, q: int):
    if occ >> q & 1:
        return None, 0
    sign = -1 if (occ & ((1 << q) - 1)).bit_count() & 1 else 1
    return occ | (1 << q), sign


def _expect_hop(wfn: SparseWavefunction, i: int, j: int, string_modes) -> float:
    """``<psi| a_j^dag a_i prod_{q in string_modes}(1 - 2 n_q) |psi>`` by explicit
    ladder-operator action on determinants."""
    lookup = wfn.as_dict()
    total = 0.0
    for occ, c in lookup.items():
        factor = 1
        for q in string_modes:
            if occ >> q & 1:
                factor = -factor
        mid, s1 = _annihilate(occ, i)
        if mid is None:
            continue
        out, s2 = _create(mid, j)
        if out is None:
            continue
        partner = lookup.get(out)
        if partner is not None:
            total += partner * s1 * s2 * factor * c
    return total


def same_spin_offdiag_terms(wfn: SparseWavefunction, i: int, j: int) -> tuple[float, float]:
    """Split the same-spin coherence into ``<a_j^dag a_i>`` and the parity-string
    correction.

    In the Jordan-Wigner picture the qubit coherence between spin-orbitals ``i``
    and ``j`` is ``<a_j^dag a_i (-1)^n_S>`` with ``S`` the modes sitting between
    them in qubit order. Writing ``(-1)^n_S = 1 - 2 n_S`` (for a single string
    mode) gives the hopping term plus ``-2 <a_j^dag a_i n_S>``. With the
    alpha-block/beta-block layout used here, ``S`` is the alpha orbitals strictly
    between ``i`` and ``j``; it is empty for neighbours, where the coherence
    is the plain one-body element.

    Returns ``(hopping, string_correction)``; their sum is the coherence.
    """
    if not wfn.is_sz_conserving():
        raise ModelError("same-spin analysis requires an Sz-conserving wavefunction with even N")
    m = wfn.n_qubits // 2
    _check_qubit(wfn, i)
    _check_qubit(wfn, j)
    if i == j:
        raise ArgumentError("same_spin_offdiag needs two distinct orbitals")
    if i >= m or j >= m:
        raise ArgumentError(f"indices must lie in the alpha block 0..{m - 1}; use spin symmetry for beta")
    lo, hi = min(i, j), max(i, j)
    string = range(lo + 1, hi)
    hop = _expect_hop(wfn, lo, hi, ())
    full = _expect_hop(wfn, lo, hi, string)
    return hop, full - hop


def same_spin_offdiag(wfn: SparseWavefunction, i: int, j: int) -> float:
    """``<01|rho_ij|10>`` of a same-spin (alpha) pair via the fermionic route.

    Agrees with ``pair_density_matrix(wfn, i, j).m[1, 2]`` for ``i < j``; the
    sign convention is fixed by that agreement (bra ``|01>`` = ``j`` occupied).
    """
    hop, correction = same_spin_offdiag_terms(wfn, i, j)
    return hop + correction


def dense_statevector(wfn: SparseWavefunction) -> np.ndarray:
    """Amplitude of determinant ``d`` at index ``sum_q bit_q 2^q``."""
    if wfn.n_qubits > DENSE_MAX_QUBITS:
        raise CapacityError(f"dense statevector limited to {DENSE_MAX_QUBITS} qubits, got {wfn.n_qubits}")
    psi = np.zeros(1 << wfn.n_qubits)
    psi[np.asarray(wfn.occupations, dtype=np.int64)] = wfn.amplitudes
    return psi
