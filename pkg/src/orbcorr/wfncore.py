"""Determinant bitstrings, sparse wavefunctions and their text format.

Bit ``q`` of a determinant is the occupation of qubit/spin-orbital ``q``.
For a wavefunction over ``N = 2M`` qubits, qubits ``0..M-1`` are the alpha
spin-orbitals and ``M..2M-1`` the beta ones. A determinant stands for the
product of creation operators in ascending qubit order acting on the vacuum,
so stored amplitudes coincide with qubit-space (Jordan-Wigner) amplitudes.

In the text format qubit 0 is the *leftmost* character::

    # comment
    4 1 1
    1010 0.9
    0101 -0.3
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from orbcorr.errors import DegenerateStateError, DimensionError, DuplicateError, ParseError

MAX_QUBITS = 1024
WORD_BITS = 64
_WORD_MASK = (1 << WORD_BITS) - 1


@dataclass(frozen=True, order=True)
class Determinant:
    """Occupation bitstring of ``n_qubits`` spin-orbitals."""

    occupation: int
    n_qubits: int

    def __post_init__(self):
        if not 0 < self.n_qubits <= MAX_QUBITS:
            raise DimensionError(f"n_qubits must be in 1..{MAX_QUBITS}, got {self.n_qubits}")
        if self.occupation < 0 or self.occupation >> self.n_qubits:
            raise DimensionError(f"occupation does not fit in {self.n_qubits} qubits")

    @classmethod
    def from_string(cls, bits: str) -> Determinant:
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError(f"not a bitstring: {bits!r}")
        # qubit 0 is leftmost, i.e. the reversed string is the binary literal
        return cls(int(bits[::-1], 2), len(bits))

    def to_string(self) -> str:
        return format(self.occupation, f"0{self.n_qubits}b")[::-1]

    def occupied(self) -> list[int]:
        return [q for q in range(self.n_qubits) if self.occupation >> q & 1]

    def __getitem__(self, q: int) -> int:
        return self.occupation >> q & 1

    def __str__(self):
        return self.to_string()


def occupations_to_words(occupations: Iterable[int], n_qubits: int) -> np.ndarray:
    """Pack integer bitstrings into a ``(n, ceil(N/64))`` uint64 array."""
    occupations = list(occupations)
    n_words = max(1, -(-n_qubits // WORD_BITS))
    out = np.zeros((len(occupations), n_words), dtype=np.uint64)
    for w in range(n_words):
        shift = w * WORD_BITS
        out[:, w] = np.fromiter(
            ((occ >> shift) & _WORD_MASK for occ in occupations), dtype=np.uint64, count=len(occupations)
        )
    return out


@dataclass(frozen=True, eq=False)
class SparseWavefunction:
    """Real-amplitude expansion over distinct determinants.

    Immutable after construction. ``occupations`` holds the determinants as
    Python integers; ``words`` packs them into fixed-width 64-bit words for the
    vectorized kernels.
    """

    n_qubits: int
    n_alpha: int
    n_beta: int
    occupations: tuple[int, ...]
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 0 < self.n_qubits <= MAX_QUBITS:
            raise DimensionError(f"n_qubits must be in 1..{MAX_QUBITS}, got {self.n_qubits}")
        occ = tuple(int(o) for o in self.occupations)
        amps = np.array(self.amplitudes, dtype=np.float64).reshape(-1)
        if len(occ) != amps.shape[0]:
            raise DimensionError(f"{len(occ)} determinants but {amps.shape[0]} amplitudes")
        limit = 1 << self.n_qubits
        for o in occ:
            if o < 0 or o >= limit:
                raise DimensionError(f"determinant {o:#x} does not fit in {self.n_qubits} qubits")
        if len(set(occ)) != len(occ):
            raise DuplicateError("determinants must be pairwise distinct")
        amps.setflags(write=False)
        object.__setattr__(self, "occupations", occ)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_terms(cls, n_qubits, n_alpha, n_beta, terms) -> SparseWavefunction:
        """Build from ``(determinant, amplitude)`` pairs; determinants may be
        ``Determinant``, int or bitstring."""
        occ, amps = [], []
        for det, amp in terms:
            if isinstance(det, str):
                det = Determinant.from_string(det)
                if det.n_qubits != n_qubits:
                    raise DimensionError(f"bitstring length {det.n_qubits} != {n_qubits}")
            occ.append(det.occupation if isinstance(det, Determinant) else int(det))
            amps.append(float(amp))
        return cls(n_qubits, n_alpha, n_beta, tuple(occ), np.asarray(amps, dtype=np.float64))

    def __len__(self):
        return len(self.occupations)

    @property
    def chi(self) -> int:
        return len(self.occupations)

    @property
    def n_spatial(self) -> int:
        return self.n_qubits // 2

    @property
    def terms(self) -> list[tuple[Determinant, float]]:
        return [(Determinant(o, self.n_qubits), float(c)) for o, c in zip(self.occupations, self.amplitudes)]

    @cached_property
    def words(self) -> np.ndarray:
        w = occupations_to_words(self.occupations, self.n_qubits)
        w.setflags(write=False)
        return w

    def bit(self, q: int) -> np.ndarray:
        """Occupation (0/1, uint64) of qubit ``q`` across all terms."""
        return (self.words[:, q // WORD_BITS] >> np.uint64(q % WORD_BITS)) & np.uint64(1)

    def norm_squared(self) -> float:
        return float(np.dot(self.amplitudes, self.amplitudes))

    def is_number_conserving(self) -> bool:
        counts = {o.bit_count() for o in self.occupations}
        return len(counts) <= 1

    def is_sz_conserving(self) -> bool:
        """All determinants carry ``(n_alpha, n_beta)`` electrons in the alpha/beta blocks."""
        if self.n_qubits % 2:
            return False
        m = self.n_qubits // 2
        amask = (1 << m) - 1
        return all(
            (o & amask).bit_count() == self.n_alpha and (o >> m).bit_count() == self.n_beta
            for o in self.occupations
        )

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.occupations, self.amplitudes.tolist()))

    def with_amplitudes(self, amplitudes) -> SparseWavefunction:
        return SparseWavefunction(self.n_qubits, self.n_alpha, self.n_beta, self.occupations, amplitudes)

    def subset(self, index) -> SparseWavefunction:
        index = np.asarray(index, dtype=np.intp)
        occ = tuple(self.occupations[k] for k in index)
        return SparseWavefunction(self.n_qubits, self.n_alpha, self.n_beta, occ, self.amplitudes[index])


def normalize(wfn: SparseWavefunction) -> SparseWavefunction:
    scale = float(np.max(np.abs(wfn.amplitudes), initial=0.0))
    if not scale > 0.0 or not math.isfinite(scale):
        raise DegenerateStateError("cannot normalize a zero-norm wavefunction")
    # pre-scaling avoids under/overflow of the squared norm
    c = wfn.amplitudes / scale
    return wfn.with_amplitudes(c / math.sqrt(float(np.dot(c, c))))


def truncate_top_chi(wfn: SparseWavefunction, chi: int, renormalize: bool = True) -> SparseWavefunction:
    """Keep the ``chi`` largest-magnitude terms.

    Ties in ``|c|`` go to the smaller determinant (as an unsigned integer with
    qubit 0 least significant). Retained terms keep their original order, which
    makes the operation idempotent.
    """
    if chi < 1:
        raise ValueError(f"chi must be >= 1, got {chi}")
    if chi >= len(wfn):
        # already-normalized input comes back untouched
        if renormalize and abs(wfn.norm_squared() - 1.0) > 1e-14:
            return normalize(wfn)
        return wfn
    words = wfn.words
    # np.lexsort: last key is primary; then most-significant word first
    keys = [words[:, w] for w in range(words.shape[1])] + [-np.abs(wfn.amplitudes)]
    order = np.lexsort(keys)
    kept = np.sort(order[:chi])
    out = wfn.subset(kept)
    return normalize(out) if renormalize else out


def parse_wavefunction(stream: TextIO | str) -> SparseWavefunction:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header = None
    occ: list[int] = []
    amps: list[float] = []
    first_seen: dict[int, int] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if header is None:
            try:
                n, na, nb = (int(x) for x in fields)
            except ValueError:
                raise ParseError(f"expected header 'N N_alpha N_beta', got {line!r}", lineno) from None
            if not 0 < n <= MAX_QUBITS:
                raise DimensionError(f"line {lineno}: N must be in 1..{MAX_QUBITS}, got {n}")
            if na < 0 or nb < 0:
                raise ParseError("electron counts must be non-negative", lineno)
            header = (n, na, nb)
            continue
        if len(fields) != 2:
            raise ParseError(f"expected '<bitstring> <amplitude>', got {line!r}", lineno)
        bits, value = fields
        if set(bits) - {"0", "1"}:
            raise ParseError(f"invalid bitstring {bits!r}", lineno)
        if len(bits) != header[0]:
            raise DimensionError(f"line {lineno}: bitstring length {len(bits)} != N={header[0]}")
        try:
            amp = float(value)
        except ValueError:
            raise ParseError(f"invalid amplitude {value!r}", lineno) from None
        if not math.isfinite(amp):
            raise ParseError(f"non-finite amplitude {value!r}", lineno)
        o = int(bits[::-1], 2)
        if o in first_seen:
            raise DuplicateError(f"line {lineno}: determinant {bits} already given on line {first_seen[o]}")
        first_seen[o] = lineno
        occ.append(o)
        amps.append(amp)
    if header is None:
        raise ParseError("missing header line 'N N_alpha N_beta'")
    return SparseWavefunction(header[0], header[1], header[2], tuple(occ), np.asarray(amps, dtype=np.float64))


def format_wavefunction(wfn: SparseWavefunction) -> str:
    lines = [f"{wfn.n_qubits} {wfn.n_alpha} {wfn.n_beta}"]
    width = wfn.n_qubits
    for o, c in zip(wfn.occupations, wfn.amplitudes.tolist()):
        lines.append(f"{format(o, f'0{width}b')[::-1]} {c!r}")
    return "\n".join(lines) + "\n"


def read_wavefunction(path) -> SparseWavefunction:
    with open(path, encoding="utf-8") as fh:
        return parse_wavefunction(fh)


def write_wavefunction(wfn: SparseWavefunction, path) -> None:
    Path(path).write_text(format_wavefunction(wfn), encoding="utf-8")
