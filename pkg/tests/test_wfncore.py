import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbcorr.errors import DegenerateStateError, DimensionError, DuplicateError, ParseError
from orbcorr.wfncore import (
    Determinant,
    SparseWavefunction,
    format_wavefunction,
    normalize,
    occupations_to_words,
    parse_wavefunction,
    read_wavefunction,
    truncate_top_chi,
    write_wavefunction,
)

S = 1 / math.sqrt(2)


def test_parse_single_determinant():
    w = parse_wavefunction("2 1 0\n10 1.0\n")
    assert (w.n_qubits, w.n_alpha, w.n_beta) == (2, 1, 0)
    assert w.occupations == (0b01,)  # qubit 0 is leftmost
    assert w.amplitudes.tolist() == [1.0]


def test_parse_bell_like_keeps_file_order():
    w = parse_wavefunction("2 1 0\n10 0.7071067811865476\n01 0.7071067811865476\n")
    assert [str(d) for d, _ in w.terms] == ["10", "01"]
    assert w.norm_squared() == pytest.approx(1.0, abs=1e-15)


def test_parse_comments_and_blank_lines():
    w = parse_wavefunction("# header follows\n\n3 1 1\n# a term\n110 -0.5\n")
    assert w.occupations == (0b011,)
    assert w.amplitudes[0] == -0.5


@pytest.mark.parametrize(
    "text, exc, line",
    [
        ("2 1 0\n1x 0.5\n", ParseError, 2),
        ("2 1 0\n10\n", ParseError, 2),
        ("2 1 0\n10 abc\n", ParseError, 2),
        ("two 1 0\n", ParseError, 1),
    ],
)
def test_parse_errors_carry_line_number(text, exc, line):
    with pytest.raises(exc) as info:
        parse_wavefunction(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_parse_length_mismatch():
    with pytest.raises(DimensionError):
        parse_wavefunction("3 1 0\n10 1.0\n")


def test_parse_duplicate_rejected():
    with pytest.raises(DuplicateError, match="line 3"):
        parse_wavefunction("2 1 0\n10 0.5\n10 0.5\n")


def test_missing_header():
    with pytest.raises(ParseError):
        parse_wavefunction("# nothing\n")


def test_determinant_string_roundtrip():
    d = Determinant.from_string("1011")
    assert d.occupation == 0b1101
    assert d.occupied() == [0, 2, 3]
    assert d.to_string() == "1011"
    assert d[1] == 0


def test_words_for_wide_bitstrings():
    n = 130
    occ = [(1 << 129) | (1 << 64) | 1, 1 << 63]
    words = occupations_to_words(occ, n)
    assert words.shape == (2, 3)
    assert words[0].tolist() == [1, 1, 2]
    assert words[1].tolist() == [1 << 63, 0, 0]


def test_normalize_examples():
    w = normalize(SparseWavefunction.from_terms(2, 1, 0, [("10", 2.0)]))
    assert w.amplitudes.tolist() == [1.0]
    w = normalize(SparseWavefunction.from_terms(2, 1, 0, [("10", 0.9), ("01", 0.3)]))
    np.testing.assert_allclose(w.amplitudes, [0.9 / math.sqrt(0.9), 0.3 / math.sqrt(0.9)], rtol=0, atol=1e-15)


@pytest.mark.parametrize("terms", [[], [("10", 0.0), ("01", 0.0)]])
def test_normalize_degenerate(terms):
    with pytest.raises(DegenerateStateError):
        normalize(SparseWavefunction.from_terms(2, 1, 0, terms))


def test_truncate_ties_by_bitstring_value():
    # a=|1000>, b=|0100>, c=|0010>, d=|0001>; b and c tie, b has the smaller integer
    w = SparseWavefunction.from_terms(4, 1, 0, [("1000", 0.9), ("0010", 0.3), ("0100", 0.3), ("0001", 0.1)])
    t = truncate_top_chi(w, 2, renormalize=True)
    assert [str(d) for d, _ in t.terms] == ["1000", "0100"]
    norm = math.sqrt(0.9**2 + 0.3**2)
    np.testing.assert_allclose(t.amplitudes, [0.9 / norm, 0.3 / norm], atol=1e-15)
    assert t.amplitudes[0] == pytest.approx(0.9487, abs=1e-4)
    assert t.amplitudes[1] == pytest.approx(0.3162, abs=1e-4)


def test_truncate_chi_beyond_size_is_identity():
    w = normalize(SparseWavefunction.from_terms(3, 1, 0, [("100", 0.6), ("010", -0.8)]))
    assert truncate_top_chi(w, 10) is w
    assert truncate_top_chi(w, 2, renormalize=False) is w


def test_truncate_bell_to_one():
    w = SparseWavefunction.from_terms(2, 1, 0, [("10", S), ("01", S)])
    t = truncate_top_chi(w, 1)
    assert len(t) == 1
    assert t.amplitudes[0] == pytest.approx(1.0, abs=1e-15)


def test_truncate_without_renormalize():
    w = SparseWavefunction.from_terms(3, 1, 0, [("100", 0.6), ("010", -0.8), ("001", 0.1)])
    t = truncate_top_chi(w, 2, renormalize=False)
    assert t.amplitudes.tolist() == [0.6, -0.8]


def test_truncate_chi_must_be_positive():
    w = SparseWavefunction.from_terms(2, 1, 0, [("10", 1.0)])
    with pytest.raises(ValueError):
        truncate_top_chi(w, 0)


def test_wavefunction_is_immutable():
    w = SparseWavefunction.from_terms(2, 1, 0, [("10", 1.0)])
    with pytest.raises(ValueError):
        w.amplitudes[0] = 2.0


def test_file_roundtrip(tmp_path):
    w = normalize(SparseWavefunction.from_terms(4, 1, 1, [("1010", 0.1), ("0101", -0.7), ("1001", 1e-9)]))
    p = tmp_path / "x.wfn"
    write_wavefunction(w, p)
    back = read_wavefunction(p)
    assert back.occupations == w.occupations
    assert np.array_equal(back.amplitudes, w.amplitudes)
    assert format_wavefunction(back) == p.read_text()


@st.composite
def wavefunctions(draw, max_qubits=70):
    n = draw(st.integers(1, max_qubits))
    occ = draw(st.lists(st.integers(0, 2**n - 1), min_size=1, max_size=30, unique=True))
    amps = draw(st.lists(st.floats(-10, 10, allow_nan=False), min_size=len(occ), max_size=len(occ)))
    if not any(amps):
        amps[0] = 1.0
    return SparseWavefunction(n, 0, 0, tuple(occ), np.array(amps))


@given(wavefunctions())
@settings(max_examples=80, deadline=None)
def test_roundtrip_property(w):
    assert parse_wavefunction(format_wavefunction(w)).occupations == w.occupations
    assert format_wavefunction(parse_wavefunction(format_wavefunction(w))) == format_wavefunction(w)


@given(wavefunctions(), st.integers(1, 40))
@settings(max_examples=80, deadline=None)
def test_truncation_properties(w, chi):
    t = truncate_top_chi(w, chi, renormalize=True)
    assert len(t) == min(chi, len(w))
    assert abs(t.norm_squared() - 1.0) <= 1e-12
    again = truncate_top_chi(t, chi, renormalize=True)
    assert again.occupations == t.occupations
    assert np.array_equal(again.amplitudes, t.amplitudes)
    # renormalized truncation never shrinks the largest coefficient
    assert np.abs(t.amplitudes).max() >= np.abs(normalize(w).amplitudes).max() - 1e-15
    # kept magnitudes dominate the dropped ones
    dropped = set(w.occupations) - set(t.occupations)
    if dropped:
        kept_min = min(abs(c) for o, c in w.as_dict().items() if o in t.occupations)
        assert all(abs(w.as_dict()[o]) <= kept_min for o in dropped)


@given(wavefunctions())
@settings(max_examples=50, deadline=None)
def test_normalize_property(w):
    assert abs(normalize(w).norm_squared() - 1.0) <= 1e-12
