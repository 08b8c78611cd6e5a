import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_partial_trace, random_conserving_state, random_state, statevector
from orbcorr.errors import ConsistencyError, NormalizationError, PSDViolationError, UndefinedMetricError
from orbcorr.fci import ground_state, hubbard_hamiltonian
from orbcorr.info import (
    build_report,
    classical_mutual_information,
    dephase_qubit,
    gamma_metric,
    l1_metric,
    measurement_channel,
    mutual_information_matrix,
    mutual_information_pair,
    pair_mutual_information,
    shannon_entropy,
    top_entropy_qubits,
    von_neumann_entropy,
)
from orbcorr.trace import pair_density_matrix
from orbcorr.wfncore import SparseWavefunction

S = 1 / math.sqrt(2)
LN2 = math.log(2)
BELL = SparseWavefunction.from_terms(2, 1, 0, [("01", S), ("10", S)])
GHZ = SparseWavefunction.from_terms(3, 0, 0, [("000", S), ("111", S)])
BELL_DM = np.array([[0, 0, 0, 0], [0, 0.5, 0.5, 0], [0, 0.5, 0.5, 0], [0, 0, 0, 0]])


def random_density_matrix(rng, dim=4, rank=None):
    g = rng.normal(size=(dim, rank or dim))
    m = g @ g.T
    return m / np.trace(m)


def test_von_neumann_examples():
    assert von_neumann_entropy(np.diag([1.0, 0.0])) == 0.0
    assert von_neumann_entropy(np.eye(4) / 4) == pytest.approx(math.log(4), abs=1e-12)
    assert von_neumann_entropy(BELL_DM) == pytest.approx(0.0, abs=1e-12)


def test_von_neumann_errors():
    with pytest.raises(NormalizationError):
        von_neumann_entropy(np.diag([0.5, 0.4]))
    with pytest.raises(PSDViolationError):
        von_neumann_entropy(np.array([[0.5, 0.9], [0.9, 0.5]]))


def test_von_neumann_clamps_roundoff():
    m = np.diag([1.0 + 5e-13, -5e-13])
    assert von_neumann_entropy(m) == 0.0


def test_shannon_examples():
    assert shannon_entropy([0.5, 0.5]) == pytest.approx(LN2, abs=1e-15)
    assert shannon_entropy([1, 0, 0, 0]) == 0.0
    with pytest.raises(NormalizationError):
        shannon_entropy([0.5, 0.6])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=8).filter(lambda v: sum(v) > 1e-3))
@settings(max_examples=60, deadline=None)
def test_shannon_matches_von_neumann_of_diagonal(v):
    p = np.array(v) / sum(v)
    assert shannon_entropy(p) == pytest.approx(von_neumann_entropy(np.diag(p)), abs=1e-12)


def test_measurement_channel():
    np.testing.assert_array_equal(measurement_channel(BELL_DM), np.diag([0, 0.5, 0.5, 0]))
    d = np.diag([0.1, 0.2, 0.3, 0.4])
    np.testing.assert_array_equal(measurement_channel(d), d)


def test_measurement_channel_preserves_trace(rng):
    for _ in range(20):
        m = random_density_matrix(rng)
        assert np.trace(measurement_channel(m)) == pytest.approx(np.trace(m), abs=1e-15)


def test_dephase_qubit_pattern():
    m = np.arange(16.0).reshape(4, 4)
    d0 = dephase_qubit(m, 0)
    # first bit flips: rows {0,1} vs {2,3}
    assert d0[0, 2] == d0[1, 3] == d0[2, 0] == 0 and d0[0, 1] == 1 and d0[2, 3] == 11
    d1 = dephase_qubit(m, 1)
    assert d1[0, 1] == d1[2, 3] == 0 and d1[0, 2] == 2 and d1[1, 3] == 7
    np.testing.assert_array_equal(dephase_qubit(d0, 1), measurement_channel(m))


def test_mutual_information_pair_examples():
    q, c = mutual_information_pair(BELL, 0, 1)
    assert q == pytest.approx(2 * LN2, abs=1e-12)
    assert c == pytest.approx(LN2, abs=1e-12)
    prod = SparseWavefunction.from_terms(2, 0, 0, [("00", 1.0)])
    assert mutual_information_pair(prod, 0, 1) == (0.0, 0.0)
    q, c = mutual_information_pair(GHZ, 0, 1)
    assert q == pytest.approx(LN2, abs=1e-12) and c == pytest.approx(LN2, abs=1e-12)


def test_opposite_spin_pairs_are_classical(rng):
    for _ in range(5):
        w = random_conserving_state(rng, 4, 2, 2, 30)
        for i in range(4):
            for j in range(4, 8):
                q, c = mutual_information_pair(w, i, j)
                assert abs(q - c) <= 1e-10


def test_matrix_bell_and_product():
    mi = mutual_information_matrix(BELL)
    assert np.isnan(mi.quantum[0, 0]) and np.isnan(mi.classical[1, 1])
    assert mi.quantum[0, 1] == pytest.approx(2 * LN2, abs=1e-12)
    prod = SparseWavefunction.from_terms(3, 1, 0, [("100", 1.0)])
    q, c = mutual_information_matrix(prod).upper()
    assert np.all(q == 0) and np.all(c == 0)


def test_matrix_against_dense_oracle(rng):
    w = random_state(rng, 10, 80)
    psi = statevector(w)
    mi = mutual_information_matrix(w)
    for i, j in itertools.combinations(range(10), 2):
        rho = dense_partial_trace(psi, 10, [i, j])
        assert mi.quantum[i, j] == pytest.approx(pair_mutual_information(rho), abs=1e-10)
        assert mi.classical[i, j] == pytest.approx(classical_mutual_information(np.diag(rho)), abs=1e-10)
        assert mi.quantum[j, i] == mi.quantum[i, j]


def test_matrix_worker_count_is_bitwise_irrelevant(rng):
    w = random_state(rng, 14, 2000)
    a = mutual_information_matrix(w, workers=1)
    b = mutual_information_matrix(w, workers=4)
    assert np.array_equal(a.quantum, b.quantum, equal_nan=True)
    assert np.array_equal(a.classical, b.classical, equal_nan=True)


def test_l1_examples():
    assert l1_metric(mutual_information_matrix(BELL)) == pytest.approx(50.0, abs=1e-10)
    assert l1_metric(mutual_information_matrix(GHZ)) == pytest.approx(0.0, abs=1e-10)
    prod = SparseWavefunction.from_terms(2, 0, 0, [("00", 1.0)])
    with pytest.raises(UndefinedMetricError):
        l1_metric(mutual_information_matrix(prod))


def test_gamma_examples():
    assert gamma_metric(np.diag([1.0, 1.0, 0.0]), 2) == 0.0
    assert gamma_metric(np.array([[0.5, 0.5], [0.5, 0.5]]), 1) == pytest.approx(1.0)
    with pytest.raises(ConsistencyError):
        gamma_metric(np.diag([1.0, 0.5]), 2)


def test_top_entropy_ties_by_index():
    assert top_entropy_qubits([0.1, 0.5, 0.5, 0.2], count=3) == [1, 2, 3]
    assert len(top_entropy_qubits(np.zeros(150))) == 100


def test_report_bell():
    r = build_report(BELL)
    assert r.l1_percent == pytest.approx(50.0, abs=1e-10)
    assert len(r.sorted_mi_quantum) == 1
    assert r.gamma == pytest.approx(1.0)
    assert r.unit == "nats"


def test_report_product_flags_undefined_l1():
    r = build_report(SparseWavefunction.from_terms(4, 1, 1, [("1010", 1.0)]))
    assert r.l1_percent is None
    assert any("L1 undefined" in w for w in r.warnings)
    assert np.all(r.sorted_mi_quantum == 0)
    assert r.gamma == 0.0


def test_report_on_fci_state():
    gs = ground_state(hubbard_hamiltonian(4, 1.0, 4.0), 2, 2)
    r = build_report(gs.wfn)
    assert np.all(np.diff(r.sorted_mi_quantum) <= 0)
    assert np.all(r.sorted_mi_quantum - r.sorted_mi_classical >= -1e-10)
    assert np.all(r.mi_difference <= 1e-10)
    np.testing.assert_allclose(r.entropy_difference, 0.0, atol=1e-10)
    assert len(r.top_entropy_qubits) == 8


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_monotonicity_chain_random_pair_matrices(seed, rank):
    rng = np.random.default_rng(seed)
    m = random_density_matrix(rng, rank=rank)
    full = pair_mutual_information(m)
    one = pair_mutual_information(dephase_qubit(m, 0))
    other = pair_mutual_information(dephase_qubit(m, 1))
    both = pair_mutual_information(measurement_channel(m))
    shannon = classical_mutual_information(np.diag(m))
    assert full - one >= -1e-10 and full - other >= -1e-10
    assert one - both >= -1e-10 and other - both >= -1e-10
    assert both == pytest.approx(shannon, abs=1e-10)


@given(st.integers(2, 9), st.integers(1, 120), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_information_invariants(n, chi, seed):
    rng = np.random.default_rng(seed)
    w = random_state(rng, n, chi)
    mi = mutual_information_matrix(w)
    q, c = mi.upper()
    assert np.all(q >= -1e-10) and np.all(c >= -1e-10)
    assert np.all(q - c >= -1e-10)
    np.testing.assert_array_equal(mi.quantum, mi.quantum.T)
    r = build_report(w)
    assert np.all(r.entropies_vn <= LN2 + 1e-10) and np.all(r.entropies_vn >= 0)
    np.testing.assert_allclose(r.entropies_vn, r.entropies_sh, atol=1e-10)
    for i, j in itertools.combinations(range(n), 2):
        s_pair = von_neumann_entropy(pair_density_matrix(w, i, j).m)
        assert -1e-12 <= s_pair <= math.log(4) + 1e-10
    if r.l1_percent is not None:
        assert -1e-8 <= r.l1_percent <= 100 + 1e-8


@given(st.lists(st.floats(0, 1), min_size=4, max_size=4).filter(lambda v: sum(v) > 1e-3))
@settings(max_examples=40, deadline=None)
def test_diagonal_pairs_have_equal_informations(v):
    p = np.array(v) / sum(v)
    m = np.diag(p)
    assert abs(pair_mutual_information(m) - classical_mutual_information(p)) <= 1e-8
