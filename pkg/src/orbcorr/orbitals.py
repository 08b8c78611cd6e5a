"""FCIDUMP I/O, orbital rotations, natural orbitals and the iterative NO loop."""
from __future__ import annotations

import io
import logging
import re
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, TextIO

import numpy as np

from orbcorr.errors import ArgumentError, DimensionError, FormatError, ParseError, UndefinedMetricError
from orbcorr.fci import DEFAULT_DENSE_THRESHOLD, Hamiltonian, ground_state
from orbcorr.info import gamma_metric, l1_metric, mutual_information_matrix
from orbcorr.trace import OneBodyRDM, one_body_rdm
from orbcorr.wfncore import SparseWavefunction, truncate_top_chi

log = logging.getLogger(__name__)

_HEADER_END = re.compile(r"(&END|/)\s*$", re.IGNORECASE)


def _header_value(header: str, key: str):
    match = re.search(rf"\b{key}\s*=\s*([^=]*?)(?=,?\s*[A-Z_][A-Z0-9_]*\s*=|&END|/|$)", header, re.IGNORECASE)
    if match is None:
        return None
    return [v for v in re.split(r"[,\s]+", match.group(1).strip()) if v]


def parse_fcidump(stream: TextIO | str) -> Hamiltonian:
    """Read an FCIDUMP, completing the 8-fold symmetry of the stored integrals."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    lines = stream.readlines()
    if not lines or not lines[0].lstrip().upper().startswith("&FCI"):
        raise FormatError("missing '&FCI' namelist header", 1)
    header_parts = []
    body_start = None
    for k, line in enumerate(lines):
        header_parts.append(line.strip())
        if _HEADER_END.search(line.strip()):
            body_start = k + 1
            break
    if body_start is None:
        raise FormatError("unterminated FCIDUMP header (no '&END' or '/')")
    header = " ".join(header_parts)
    norb = _header_value(header, "NORB")
    if not norb:
        raise FormatError("header lacks NORB")
    m = int(norb[0])
    nelec = _header_value(header, "NELEC")
    ms2 = _header_value(header, "MS2")
    orbsym = _header_value(header, "ORBSYM")
    if orbsym is not None and len(set(orbsym)) > 1:
        warnings.warn("ORBSYM point-group labels are ignored", stacklevel=2)
    h1 = np.zeros((m, m))
    eri = np.zeros((m, m, m, m))
    e_core = 0.0
    for lineno, line in enumerate(lines[body_start:], start=body_start + 1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 5:
            raise ParseError(f"expected '<value> i j k l', got {line.strip()!r}", lineno)
        try:
            value = float(fields[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(x) for x in fields[1:])
        except ValueError:
            raise ParseError(f"malformed integral line {line.strip()!r}", lineno) from None
        if min(i, j, k, l) < 0 or max(i, j, k, l) > m:
            raise DimensionError(f"line {lineno}: orbital index outside 1..{m}")
        if i == j == k == l == 0:
            e_core = value
        elif k == 0 and l == 0:
            if i == 0 or j == 0:
                # orbital energies (i 0 0 0) carry no integral information
                continue
            h1[i - 1, j - 1] = h1[j - 1, i - 1] = value
        else:
            if 0 in (i, j, k, l):
                raise ParseError(f"mixed zero/nonzero indices {(i, j, k, l)}", lineno)
            p, q, r, s = i - 1, j - 1, k - 1, l - 1
            for a, b, c, d in ((p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r)):
                eri[a, b, c, d] = eri[c, d, a, b] = value
    return Hamiltonian(
        m, h1, eri, e_core,
        n_elec=int(nelec[0]) if nelec else None,
        ms2=int(ms2[0]) if ms2 else None,
        orbsym=tuple(int(x) for x in orbsym) if orbsym else None,
    )


def read_fcidump(path) -> Hamiltonian:
    with open(path, encoding="utf-8") as fh:
        return parse_fcidump(fh)


def format_fcidump(h: Hamiltonian, tol: float = 0.0) -> str:
    """Canonical FCIDUMP text; only symmetry-unique integrals are written."""
    m = h.n_spatial
    out = io.StringIO()
    n_elec = h.n_elec if h.n_elec is not None else 0
    ms2 = h.ms2 if h.ms2 is not None else 0
    out.write(f" &FCI NORB={m},NELEC={n_elec},MS2={ms2},\n")
    orbsym = h.orbsym if h.orbsym is not None else (1,) * m
    out.write("  ORBSYM=" + ",".join(str(x) for x in orbsym) + ",\n")
    out.write("  ISYM=1,\n &END\n")
    for i in range(m):
        for j in range(i + 1):
            ij = i * (i + 1) // 2 + j
            for k in range(m):
                for l in range(k + 1):
                    if k * (k + 1) // 2 + l > ij:
                        break
                    v = float(h.eri[i, j, k, l])
                    if v != 0.0 and abs(v) > tol:
                        out.write(f"{v!r} {i + 1} {j + 1} {k + 1} {l + 1}\n")
    for i in range(m):
        for j in range(i + 1):
            v = float(h.h1[i, j])
            if v != 0.0 and abs(v) > tol:
                out.write(f"{v!r} {i + 1} {j + 1} 0 0\n")
    out.write(f"{h.e_core!r} 0 0 0 0\n")
    return out.getvalue()


def write_fcidump(h: Hamiltonian, path, tol: float = 0.0) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_fcidump(h, tol))


@dataclass(frozen=True, eq=False)
class OrbitalRotation:
    """Orthogonal ``M x M`` matrix; column ``k`` is new orbital ``k`` in the old basis."""

    u: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=np.float64)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise ArgumentError(f"rotation must be square, got shape {u.shape}")
        err = np.abs(u.T @ u - np.eye(u.shape[0])).max(initial=0.0)
        if err > 1e-8:
            raise ArgumentError(f"rotation is not orthogonal (max |u^T u - 1| = {err:.2e})")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @classmethod
    def identity(cls, m: int) -> OrbitalRotation:
        return cls(np.eye(m))

    def then(self, other: OrbitalRotation) -> OrbitalRotation:
        """Compose: rotate by ``self`` first, then by ``other`` (in the new basis)."""
        return OrbitalRotation(self.u @ other.u)


def _symmetrize_eri(eri: np.ndarray) -> np.ndarray:
    acc = eri + eri.transpose(1, 0, 2, 3)
    acc = acc + acc.transpose(0, 1, 3, 2)
    acc = acc + acc.transpose(2, 3, 0, 1)
    return acc / 8.0


def rotate_integrals(h: Hamiltonian, u) -> Hamiltonian:
    """Express the integrals in the rotated orbitals ``u``.

    The two-electron transform runs one index at a time, O(M^5) per pass.
    """
    if not isinstance(u, OrbitalRotation):
        u = OrbitalRotation(u)
    c = u.u
    if c.shape[0] != h.n_spatial:
        raise DimensionError(f"rotation is {c.shape[0]}x{c.shape[0]}, integrals have M={h.n_spatial}")
    h1 = c.T @ h.h1 @ c
    eri = np.einsum("pqrs,sd->pqrd", h.eri, c, optimize=False)
    eri = np.einsum("pqrd,rc->pqcd", eri, c, optimize=False)
    eri = np.einsum("pqcd,qb->pbcd", eri, c, optimize=False)
    eri = np.einsum("pbcd,pa->abcd", eri, c, optimize=False)
    return Hamiltonian(h.n_spatial, 0.5 * (h1 + h1.T), _symmetrize_eri(eri), h.e_core,
                       n_elec=h.n_elec, ms2=h.ms2, orbsym=None)


class NaturalOrbitals(NamedTuple):
    rotation: OrbitalRotation
    occupations: np.ndarray


def natural_orbitals(rdm) -> NaturalOrbitals:
    """Eigenvectors of the spin-traced 1-RDM, by descending occupation.

    Accepts a spin-orbital :class:`OneBodyRDM` (its alpha and beta blocks are
    summed) or an ``M x M`` spatial matrix. Each column's largest-magnitude
    entry is made positive.
    """
    if isinstance(rdm, OneBodyRDM):
        d = rdm.spatial()
    else:
        d = np.asarray(rdm, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ArgumentError(f"RDM must be square, got shape {d.shape}")
    if np.abs(d - d.T).max(initial=0.0) > 1e-8:
        raise ArgumentError("RDM is not symmetric")
    w, v = np.linalg.eigh(0.5 * (d + d.T))
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    for k in range(v.shape[1]):
        col = v[:, k]
        if col[int(np.argmax(np.abs(col)))] < 0:
            v[:, k] = -col
    return NaturalOrbitals(OrbitalRotation(v), w)


def degenerate_occupations(occupations, tol: float = 1e-6) -> list[tuple[int, int]]:
    """Index pairs of neighbouring occupations closer than ``tol``."""
    occ = np.asarray(occupations)
    return [(k, k + 1) for k in range(occ.size - 1) if abs(occ[k] - occ[k + 1]) < tol]


@dataclass
class InoStep:
    iteration: int
    energy: float
    gamma: float
    l1_percent: float | None


@dataclass
class InoTrace:
    steps: list[InoStep] = field(default_factory=list)
    converged: bool = False
    oscillating: bool = False
    warnings: list[str] = field(default_factory=list)

    @property
    def final_gamma(self) -> float:
        return self.steps[-1].gamma

    def __len__(self):
        return len(self.steps)


@dataclass
class InoResult:
    hamiltonian: Hamiltonian
    wfn: SparseWavefunction
    trace: InoTrace
    rotation: OrbitalRotation

    def __iter__(self):
        return iter((self.hamiltonian, self.wfn, self.trace))


def ino_loop(h: Hamiltonian, n_alpha: int, n_beta: int, gamma_tol: float = 1e-8, max_iter: int = 10,
             dense_threshold: int = DEFAULT_DENSE_THRESHOLD, workers: int = 1, compute_l1: bool = True,
             chi: int | None = None, renormalize: bool = True) -> InoResult:
    """Iterate FCI -> spin-traced 1-RDM -> natural orbitals -> rotated integrals.

    Stops once gamma drops below ``gamma_tol`` or after ``max_iter`` solves.
    Each recorded step describes the wavefunction in that iteration's basis;
    L1 is evaluated on the ``chi`` largest terms when ``chi`` is given.
    """
    if max_iter < 1:
        raise ArgumentError("max_iter must be >= 1")
    trace = InoTrace()
    total = OrbitalRotation.identity(h.n_spatial)
    current = h
    n_e = n_alpha + n_beta
    wfn = None
    rising = 0
    for it in range(1, max_iter + 1):
        gs = ground_state(current, n_alpha, n_beta, dense_threshold=dense_threshold)
        wfn = gs.wfn
        for msg in gs.warnings:
            trace.warnings.append(f"iteration {it}: {msg}")
        rdm = one_body_rdm(wfn)
        gamma = gamma_metric(rdm, n_e)
        l1 = None
        if compute_l1:
            try:
                analysed = wfn if chi is None else truncate_top_chi(wfn, chi, renormalize)
                l1 = l1_metric(mutual_information_matrix(analysed, workers=workers))
            except UndefinedMetricError:
                l1 = None
        if trace.steps and gamma > trace.steps[-1].gamma:
            rising += 1
            if rising >= 2 and not trace.oscillating:
                trace.oscillating = True
                trace.warnings.append(f"iteration {it}: gamma increased on two consecutive iterations")
        else:
            rising = 0
        trace.steps.append(InoStep(it, gs.energy, gamma, l1))
        log.info("INO iteration %d: E=%.10f gamma=%.3e L1=%s", it, gs.energy, gamma, l1)
        if gamma < gamma_tol:
            trace.converged = True
            break
        if it == max_iter:
            break
        no = natural_orbitals(rdm)
        if degenerate_occupations(no.occupations):
            trace.warnings.append(f"iteration {it}: degenerate natural occupations; rotation within blocks is arbitrary")
        current = rotate_integrals(current, no.rotation)
        total = total.then(no.rotation)
    return InoResult(current, wfn, trace, total)
