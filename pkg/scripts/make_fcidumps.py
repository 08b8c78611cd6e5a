"""Generate the small molecular FCIDUMP fixtures used by the test suite.

Needs pyscf (not a dependency of the package itself):

    pip install pyscf
    python scripts/make_fcidumps.py tests/data
"""
import sys
from pathlib import Path

import json

from pyscf import fci, gto, scf
from pyscf.tools import fcidump

SYSTEMS = {
    # STO-3G keeps every FCI space below a few hundred determinants.
    "h2o_sto3g": dict(atom="O 0 0 0; H 0.757 0.586 0; H -0.757 0.586 0", basis="sto-3g"),
    "lih_sto3g": dict(atom="Li 0 0 0; H 0 0 1.6", basis="sto-3g"),
    "h6_chain_sto3g": dict(atom="; ".join(f"H 0 0 {1.8 * k}" for k in range(6)), basis="sto-3g"),
    "h4_chain_sto3g": dict(atom="; ".join(f"H 0 0 {1.5 * k}" for k in range(4)), basis="sto-3g"),
}


def main(outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    energies = {}
    for name, kw in SYSTEMS.items():
        mol = gto.M(unit="Angstrom", verbose=0, symmetry=False, **kw)
        mf = scf.RHF(mol).run()
        path = outdir / f"{name}.fcidump"
        fcidump.from_scf(mf, str(path), tol=1e-12)
        e_fci = fci.FCI(mf).kernel()[0]
        energies[name] = e_fci
        print(f"{name}: norb={mf.mo_coeff.shape[1]} nelec={mol.nelectron} E_hf={mf.e_tot:.10f} E_fci={e_fci:.10f} -> {path}")
    (outdir / "fci_energies.json").write_text(json.dumps(energies, indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data")
