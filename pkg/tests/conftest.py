import json
from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"

# (file stem, n_alpha, n_beta)
MOLECULES = [
    ("h4_chain_sto3g", 2, 2),
    ("lih_sto3g", 2, 2),
    ("h6_chain_sto3g", 3, 3),
    ("h2o_sto3g", 5, 5),
]
SMALL_MOLECULES = [m for m in MOLECULES if m[0] != "h2o_sto3g"]  # M <= 6


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def reference_energies():
    return json.loads((DATA / "fci_energies.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
