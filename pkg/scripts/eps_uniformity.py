"""Error of the scalar and two-band solvers as eps shrinks at a fixed mesh.

    python scripts/eps_uniformity.py [--eps 1,0.1,0.01,0.001]
"""

import argparse

from ngoschrod.experiments import default_config, run_experiment

PRESETS = ("scalar-const", "scalar-const-oscillatory", "scalar-variable", "twoband-unitary", "twoband-schrod")


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--eps", default="1,0.1,0.01,0.001")
    args = ap.parse_args()
    eps_list = [float(e) for e in args.eps.split(",")]
    print("preset".ljust(28) + "".join(f"eps={e:<10g}" for e in eps_list))
    for name in PRESETS:
        errs = [max(run_experiment(default_config(name, eps=e)).errors.values()) for e in eps_list]
        print(name.ljust(28) + "".join(f"{x:<14.3e}" for x in errs))


if __name__ == "__main__":
    main()
