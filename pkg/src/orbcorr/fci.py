"""Desk-scale full CI in a fixed ``(N_alpha, N_beta)`` sector.

Determinants are alpha strings times beta strings; the combined bitstring is
``alpha | beta << M`` so the layout matches :mod:`orbcorr.wfncore`.

Two independent routes to the Hamiltonian exist on purpose:

* :func:`hamiltonian_element` applies the Slater-Condon rules to one pair of
  determinants (used for the dense oracle in the tests);
* :class:`CIOperator` applies ``H`` to whole vectors through one-body
  excitation operators ``E_pq`` built from string tables (used by the solvers).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from orbcorr.errors import ArgumentError, CapacityError, ConvergenceError
from orbcorr.wfncore import SparseWavefunction

MAX_BASIS = 10**6
DENSE_LIMIT = 2 * 10**4
DEFAULT_DENSE_THRESHOLD = 2000
DEGENERACY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Spatial-orbital integrals; ``eri[p, q, r, s] = (pq|rs)`` in chemists' notation."""

    n_spatial: int
    h1: np.ndarray
    eri: np.ndarray
    e_core: float = 0.0
    n_elec: int | None = None
    ms2: int | None = None
    orbsym: tuple[int, ...] | None = None

    def __post_init__(self):
        m = self.n_spatial
        h1 = np.array(self.h1, dtype=np.float64)
        eri = np.array(self.eri, dtype=np.float64)
        if h1.shape != (m, m) or eri.shape != (m, m, m, m):
            raise ArgumentError(f"integral shapes {h1.shape}, {eri.shape} do not match M={m}")
        if not np.allclose(h1, h1.T, atol=1e-10, rtol=0):
            raise ArgumentError("h1 is not symmetric")
        for perm in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
            if not np.allclose(eri, eri.transpose(perm), atol=1e-10, rtol=0):
                raise ArgumentError("eri lacks 8-fold permutational symmetry")
        h1.setflags(write=False)
        eri.setflags(write=False)
        object.__setattr__(self, "h1", h1)
        object.__setattr__(self, "eri", eri)
        object.__setattr__(self, "e_core", float(self.e_core))


def hubbard_hamiltonian(sites: int, t: float, u: float, periodic: bool = False) -> Hamiltonian:
    """One-band Hubbard chain in the site basis.

    ``periodic`` adds the bond ``(sites-1, 0)``; for two sites it already
    exists, so the flag has no effect there.
    """
    if sites < 2:
        raise ArgumentError("a Hubbard chain needs at least two sites")
    h1 = np.zeros((sites, sites))
    for p in range(sites - 1):
        h1[p, p + 1] = h1[p + 1, p] = -t
    if periodic and sites > 2:
        h1[0, sites - 1] = h1[sites - 1, 0] = -t
    eri = np.zeros((sites,) * 4)
    for p in range(sites):
        eri[p, p, p, p] = u
    return Hamiltonian(sites, h1, eri, 0.0, n_elec=None)


def strings(m: int, n: int) -> list[int]:
    """All ``n``-electron occupation strings over ``m`` orbitals, in
    lexicographic order of the occupied-index tuples."""
    return [sum(1 << p for p in occ) for occ in itertools.combinations(range(m), n)]


@dataclass(frozen=True, eq=False)
class CIBasis:
    n_spatial: int
    n_alpha: int
    n_beta: int
    alpha: tuple[int, ...]
    beta: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.alpha) * len(self.beta)

    def __len__(self):
        return self.size

    @property
    def determinants(self) -> list[int]:
        m = self.n_spatial
        return [a | (b << m) for a in self.alpha for b in self.beta]


def enumerate_basis(m: int, n_alpha: int, n_beta: int, max_size: int = MAX_BASIS) -> CIBasis:
    if not (0 <= n_alpha <= m and 0 <= n_beta <= m):
        raise ArgumentError(f"cannot place ({n_alpha}, {n_beta}) electrons in {m} orbitals")
    size = math.comb(m, n_alpha) * math.comb(m, n_beta)
    if size > max_size:
        raise CapacityError(f"FCI space of {size} determinants exceeds the limit {max_size}")
    return CIBasis(m, n_alpha, n_beta, tuple(strings(m, n_alpha)), tuple(strings(m, n_beta)))


def _spin_orbital_eri(h: Hamiltonian, p: int, q: int, r: int, s: int) -> float:
    """Physicists' ``<pq|rs>`` over spin-orbitals (index // M = spin)."""
    m = h.n_spatial
    if p // m != r // m or q // m != s // m:
        return 0.0
    return float(h.eri[p % m, r % m, q % m, s % m])


def _apply(occ: int, ops) -> tuple[int | None, int]:
    """Apply ``(orbital, create?)`` ladder operators right to left."""
    sign = 1
    for q, create in reversed(ops):
        present = occ >> q & 1
        if present == create:
            return None, 0
        if (occ & ((1 << q) - 1)).bit_count() & 1:
            sign = -sign
        occ ^= 1 << q
    return occ, sign


def _bits(x: int) -> list[int]:
    out = []
    while x:
        low = x & -x
        out.append(low.bit_length() - 1)
        x ^= low
    return out


def hamiltonian_element(h: Hamiltonian, d1: int, d2: int) -> float:
    """``<d1|H|d2>`` by the Slater-Condon rules (spin-orbital form)."""
    d1 = getattr(d1, "occupation", d1)
    d2 = getattr(d2, "occupation", d2)
    m = h.n_spatial
    diff = d1 ^ d2
    degree = diff.bit_count() // 2
    if degree > 2 or d1.bit_count() != d2.bit_count():
        return 0.0
    if degree == 0:
        occ = _bits(d1)
        e = h.e_core + sum(h.h1[p % m, p % m] for p in occ)
        for a, p in enumerate(occ):
            for q in occ[a + 1 :]:
                e += _spin_orbital_eri(h, p, q, p, q) - _spin_orbital_eri(h, p, q, q, p)
        return float(e)
    holes = _bits(d2 & diff)  # in d2, not in d1
    parts = _bits(d1 & diff)  # in d1, not in d2
    if degree == 1:
        (i,), (a,) = holes, parts
        _, sign = _apply(d2, [(a, True), (i, False)])
        if (i // m) != (a // m):
            return 0.0
        val = h.h1[a % m, i % m]
        for n in _bits(d2 & d1):
            val += _spin_orbital_eri(h, a, n, i, n) - _spin_orbital_eri(h, a, n, n, i)
        return float(sign * val)
    i, j = holes
    a, b = parts
    _, sign = _apply(d2, [(a, True), (b, True), (j, False), (i, False)])
    val = _spin_orbital_eri(h, a, b, i, j) - _spin_orbital_eri(h, a, b, j, i)
    return float(sign * val)


def _excitation_matrices(string_list, m: int) -> list[list[sp.csr_matrix]]:
    """``E[p][q]`` = matrix of ``a_p^dag a_q`` on one spin's string space."""
    index = {s: k for k, s in enumerate(string_list)}
    n = len(string_list)
    out = []
    for p in range(m):
        row = []
        for q in range(m):
            rows, cols, vals = [], [], []
            for k, s in enumerate(string_list):
                t, sign = _apply(s, [(p, True), (q, False)])
                if t is not None:
                    rows.append(index[t])
                    cols.append(k)
                    vals.append(float(sign))
            row.append(sp.csr_matrix((vals, (rows, cols)), shape=(n, n)))
        out.append(row)
    return out


class CIOperator:
    """Action of ``H`` on CI vectors stored as ``(n_alpha_strings, n_beta_strings)``.

    ``H = sum_pq k_pq E_pq + 1/2 sum_pqrs (pq|rs) E_pq E_rs + e_core`` with
    ``k_pq = h_pq - 1/2 sum_r (pr|rp)`` and ``E_pq`` the spin-summed
    excitation operator. Beta operators pass an even number of alpha
    creators, so each spin's string table carries its own sign only.
    """

    def __init__(self, h: Hamiltonian, basis: CIBasis):
        self.h = h
        self.basis = basis
        m = h.n_spatial
        self.shape = (len(basis.alpha), len(basis.beta))
        self.ea = _excitation_matrices(basis.alpha, m)
        self.eb = _excitation_matrices(basis.beta, m)
        self.k1 = h.h1 - 0.5 * np.einsum("prrq->pq", h.eri)
        self.g = 0.5 * h.eri.reshape(m * m, m * m)

    @property
    def size(self) -> int:
        return self.basis.size

    def _epq(self, c: np.ndarray) -> np.ndarray:
        m = self.h.n_spatial
        na, nb = self.shape
        out = np.empty((m * m, na, nb) + c.shape[2:])
        for p in range(m):
            for q in range(m):
                out[p * m + q] = self._apply_e(p, q, c)
        return out

    def _apply_e(self, p: int, q: int, c: np.ndarray) -> np.ndarray:
        ea, eb = self.ea[p][q], self.eb[p][q]
        if c.ndim == 2:
            return ea @ c + (eb @ c.T).T
        # block of vectors: (na, nb, k)
        na, nb, k = c.shape
        left = (ea @ c.reshape(na, nb * k)).reshape(na, nb, k)
        right = (eb @ c.transpose(1, 0, 2).reshape(nb, na * k)).reshape(nb, na, k).transpose(1, 0, 2)
        return left + right

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """``H @ x`` for a vector (size,) or a block (size, k)."""
        na, nb = self.shape
        block = x.ndim == 2
        c = x.reshape((na, nb) + ((x.shape[1],) if block else ()))
        m = self.h.n_spatial
        t = self._epq(c)
        g = np.tensordot(self.g, t, axes=(1, 0))
        sigma = self.h.e_core * c + np.tensordot(self.k1.reshape(-1), t, axes=(0, 0))
        for p in range(m):
            for q in range(m):
                sigma = sigma + self._apply_e(p, q, g[p * m + q])
        return sigma.reshape(x.shape)

    def diagonal(self) -> np.ndarray:
        m = self.h.n_spatial
        occ_a = np.array([[s >> p & 1 for p in range(m)] for s in self.basis.alpha], dtype=np.float64)
        occ_b = np.array([[s >> p & 1 for p in range(m)] for s in self.basis.beta], dtype=np.float64)
        na, nb = self.shape
        na_full = np.repeat(occ_a, nb, axis=0)
        nb_full = np.tile(occ_b, (na, 1))
        n = na_full + nb_full
        j = np.einsum("ppqq->pq", self.h.eri)
        k = np.einsum("pqqp->pq", self.h.eri)
        hd = np.diag(self.h.h1)
        diag = n @ hd + 0.5 * np.einsum("ip,pq,iq->i", n, j, n)
        diag -= 0.5 * (np.einsum("ip,pq,iq->i", na_full, k, na_full) + np.einsum("ip,pq,iq->i", nb_full, k, nb_full))
        return diag + self.h.e_core

    def dense(self, chunk: int = 128) -> np.ndarray:
        n = self.size
        out = np.empty((n, n))
        for start in range(0, n, chunk):
            stop = min(start + chunk, n)
            block = np.zeros((n, stop - start))
            block[np.arange(start, stop), np.arange(stop - start)] = 1.0
            out[:, start:stop] = self.matvec(block)
        return 0.5 * (out + out.T)


@dataclass
class DavidsonResult:
    energies: np.ndarray
    vectors: np.ndarray
    iterations: int
    residual: float


def davidson(matvec, diag: np.ndarray, nroots: int = 1, tol: float = 1e-9, max_iter: int = 200,
             max_space: int = 60, n_guess: int = 8) -> DavidsonResult:
    """Lowest eigenpairs of a symmetric operator, diagonal preconditioner.

    ``tol`` bounds the residual norm of the lowest ``nroots`` roots.
    """
    n = diag.size
    n_guess = max(nroots, min(n_guess, n))
    order = np.lexsort((np.arange(n), diag))
    v = np.zeros((n, n_guess))
    v[order[:n_guess], np.arange(n_guess)] = 1.0
    av = matvec(v)
    residual = np.inf
    for it in range(1, max_iter + 1):
        hsub = v.T @ av
        hsub = 0.5 * (hsub + hsub.T)
        theta, s = np.linalg.eigh(hsub)
        x = v @ s[:, :nroots]
        ax = av @ s[:, :nroots]
        r = ax - x * theta[:nroots]
        norms = np.linalg.norm(r, axis=0)
        residual = float(norms.max())
        if residual < tol:
            return DavidsonResult(theta[:nroots], x, it, residual)
        new = []
        for k in range(nroots):
            if norms[k] < tol:
                continue
            denom = diag - theta[k]
            denom[np.abs(denom) < 1e-8] = 1e-8
            new.append(r[:, k] / denom)
        t = np.stack(new, axis=1)
        if v.shape[1] + t.shape[1] > max_space:
            # restart from current Ritz vectors
            keep = min(max(nroots, 2), v.shape[1])
            v = v @ s[:, :keep]
            av = av @ s[:, :keep]
        for _ in range(2):
            t -= v @ (v.T @ t)
        q, rr = np.linalg.qr(t)
        good = np.abs(np.diag(rr)) > 1e-10
        if not good.any():
            return DavidsonResult(theta[:nroots], x, it, residual)
        q = q[:, good]
        q -= v @ (v.T @ q)
        q, _ = np.linalg.qr(q)
        v = np.hstack([v, q])
        av = np.hstack([av, matvec(q)])
    raise ConvergenceError(f"Davidson did not converge in {max_iter} iterations (residual {residual:.3e})",
                           residual=residual)


@dataclass
class GroundState:
    energy: float
    wfn: SparseWavefunction
    gap: float | None
    method: str
    iterations: int = 0
    residual: float = 0.0
    warnings: list[str] = field(default_factory=list)

    @property
    def degenerate(self) -> bool:
        return self.gap is not None and self.gap < DEGENERACY_TOL

    def __iter__(self):
        # allows ``energy, wfn = ground_state(...)``
        return iter((self.energy, self.wfn))


def _fix_sign(c: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(c)))  # first index among ties
    return -c if c[k] < 0 else c


def ground_state(h: Hamiltonian, n_alpha: int, n_beta: int, dense_threshold: int = DEFAULT_DENSE_THRESHOLD,
                 tol: float = 1e-9, max_iter: int = 200) -> GroundState:
    """Lowest eigenpair of ``h`` in the ``(n_alpha, n_beta)`` sector.

    Bases up to ``dense_threshold`` determinants (capped at 2e4) use a dense
    eigensolver; larger ones use Davidson. The wavefunction is normalized with
    its largest-magnitude coefficient positive.
    """
    basis = enumerate_basis(h.n_spatial, n_alpha, n_beta)
    op = CIOperator(h, basis)
    n = basis.size
    if n <= min(dense_threshold, DENSE_LIMIT):
        w, vecs = np.linalg.eigh(op.dense())
        energy, c = float(w[0]), vecs[:, 0]
        gap = float(w[1] - w[0]) if n > 1 else None
        method, iters, res = "dense", 0, 0.0
    else:
        result = davidson(op.matvec, op.diagonal(), nroots=2, tol=tol, max_iter=max_iter)
        energy, c = float(result.energies[0]), result.vectors[:, 0]
        gap = float(result.energies[1] - result.energies[0])
        method, iters, res = "davidson", result.iterations, result.residual
    c = _fix_sign(c / np.linalg.norm(c))
    wfn = SparseWavefunction(2 * h.n_spatial, n_alpha, n_beta, tuple(basis.determinants), c)
    warnings = []
    if gap is not None and gap < DEGENERACY_TOL:
        warnings.append(f"ground state is degenerate (gap {gap:.3e}); correlation analyses depend on the solver's choice")
    return GroundState(energy, wfn, gap, method, iters, res, warnings)
