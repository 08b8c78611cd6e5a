"""Time the full pairwise MI matrix on a random state and check worker-count determinism.

    python3 scripts/perf_gate.py --qubits 24 --chi 100000 --workers 4
"""
import argparse
import time

import numpy as np

from orbcorr.info import mutual_information_matrix
from orbcorr.wfncore import SparseWavefunction, normalize


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--qubits", type=int, default=24)
    parser.add_argument("--chi", type=int, default=100_000)
    parser.add_argument("--workers", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    chi = min(args.chi, 2**args.qubits)
    occ = rng.choice(2**args.qubits, size=chi, replace=False)
    wfn = normalize(SparseWavefunction(args.qubits, 0, 0, tuple(int(o) for o in occ), rng.normal(size=chi)))

    timings = {}
    results = {}
    for workers in sorted({1, args.workers}):
        start = time.perf_counter()
        results[workers] = mutual_information_matrix(wfn, workers=workers)
        timings[workers] = time.perf_counter() - start
        print(f"workers={workers}: {timings[workers]:.2f} s")
    a, b = results[1], results[args.workers]
    same = np.array_equal(a.quantum, b.quantum, equal_nan=True) and np.array_equal(a.classical, b.classical, equal_nan=True)
    print(f"bitwise identical across worker counts: {same}")


if __name__ == "__main__":
    main()
