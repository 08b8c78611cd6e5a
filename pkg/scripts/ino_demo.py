"""Print gamma and L1 per natural-orbital iteration for a few toy systems.

    python3 scripts/ino_demo.py [--max-iter 10]
"""
import argparse
from pathlib import Path

from orbcorr.fci import hubbard_hamiltonian
from orbcorr.orbitals import ino_loop, read_fcidump

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"


def systems():
    yield "hubbard dimer U=4", hubbard_hamiltonian(2, 1.0, 4.0), 1, 1
    yield "hubbard 4-site U=4", hubbard_hamiltonian(4, 1.0, 4.0), 2, 2
    yield "LiH sto-3g", read_fcidump(DATA / "lih_sto3g.fcidump"), 2, 2
    yield "H2O sto-3g", read_fcidump(DATA / "h2o_sto3g.fcidump"), 5, 5


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--max-iter", type=int, default=10)
    args = parser.parse_args()
    for label, h, na, nb in systems():
        trace = ino_loop(h, na, nb, max_iter=args.max_iter).trace
        print(f"{label}  (converged={trace.converged})")
        print(f"  {'iter':>4} {'energy':>16} {'gamma':>10} {'L1 %':>10}")
        for s in trace.steps:
            l1 = "n/a" if s.l1_percent is None else f"{s.l1_percent:.3e}"
            print(f"  {s.iteration:>4} {s.energy:>16.10f} {s.gamma:>10.3e} {l1:>10}")


if __name__ == "__main__":
    main()
