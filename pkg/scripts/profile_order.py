"""Convergence of recovery in the p mesh for each extension profile.

Uses a fixed non-normal 4x4 system and compares with ``expm(A) u0``.

    python scripts/profile_order.py [--n 6,7,8,9,10]
"""

import argparse

import numpy as np
import scipy.linalg as sla

from ngoschrod.evolve import EvolutionConfig, evolve, p_star, recover_at
from ngoschrod.schrodingerize import schrodingerize
from ngoschrod.spectral import make_axis

A = np.array([[0.3, 1, 0, 0.2], [-1, -0.5, 0.4, 0], [0, -0.4, 0.2, 0.6], [0.1, 0, -0.6, -0.8]])
U0 = np.array([1, 0.5, -0.3, 0.8])


def sup_error(profile, n, half_width=8.0):
    ax = make_axis(-half_width, half_width, n)
    S, st = schrodingerize(A, ax, profile, 0.0, u0=U0, check_domain=False)
    out = evolve(S, st, 1.0, EvolutionConfig(dt=1.0, scheme="diagonal_exact"))
    ps = p_star(S.h1_at(0.0), 1.0)
    pts = np.linspace(ps, ps + 1, 3001)
    return float(np.max(np.abs(recover_at(out, pts) - (sla.expm(A) @ U0)[:, None]))), ax.step


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", default="6,7,8,9,10")
    args = ap.parse_args()
    ns = [int(n) for n in args.n.split(",")]
    for profile in ("exp_abs", "cubic"):
        rows = [sup_error(profile, n) for n in ns]
        errs, steps = zip(*rows)
        slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
        print(f"{profile:8s} " + " ".join(f"n={n}:{e:.2e}" for n, e in zip(ns, errs)) + f"  order {slope:.2f}")


if __name__ == "__main__":
    main()
