"""Resolution study of the split-step reference for the hopping benchmark.

Prints density differences between successive x resolutions so the mesh
needed for a trustworthy reference can be read off.

    python scripts/hopping_reference_study.py --eps 1 --x-qubits 6,7 --v-qubits 4
"""

import argparse

import numpy as np

from ngoschrod.hopping import densities, paper_problem, reference_split_solver


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--eps", type=float, default=1.0)
    ap.add_argument("--T", type=float, default=2.0)
    ap.add_argument("--dt", type=float, default=0.005)
    ap.add_argument("--x-qubits", default="6,7")
    ap.add_argument("--v-qubits", type=int, default=4)
    ap.add_argument("--out", help="optional .npz with the coarse-grid densities")
    args = ap.parse_args()
    pb = paper_problem(args.eps, 3, args.v_qubits, 4)
    rhos = {}
    for qx in (int(q) for q in args.x_qubits.split(",")):
        _, _, f = reference_split_solver(pb, args.T, args.dt, qx, args.v_qubits)
        stride = 2 ** qx // pb.x_axis.M
        rhos[qx] = densities(f[:, ::stride], pb.v_axis)
        print(f"x qubits {qx}: done")
    keys = sorted(rhos)
    for a, b in zip(keys, keys[1:]):
        rel = np.max(np.abs(rhos[a] - rhos[b])) / np.max(np.abs(rhos[b]))
        print(f"2^{a} vs 2^{b}: max relative density difference {rel:.3e}")
    if args.out:
        np.savez(args.out, **{f"x{q}": r for q, r in rhos.items()})


if __name__ == "__main__":
    main()
