"""Command-line driver for the named experiments.

Subcommands::

    ngoschrod run PRESET [--eps E] [--qubits x=4 p=9] [--dt DT] [--method M]
                         [--lambda0 auto|VALUE] [--recovery point|integral]
                         [--T T] [--config FILE] [--out DIR]
    ngoschrod scan PRESET --eps-list 1,0.1,0.01 [--workers N] [...]
    ngoschrod report [DIR]
    ngoschrod resources [--qubits x=4 p=9] [--eps E]

Config files hold flat ``key = value`` lines with the same keys as the
options (``eps``, ``qubits``, ``dt``, ``method``, ``lambda0``, ``recovery``,
``T``, ``ref_dt``, ``ref_qubits``); command-line options override them.
Artifacts go under ``--out`` or ``$NGOSCHROD_OUT`` (default ``./runs``):
one CSV per field with columns ``<coords>, re, im, ref_re, ref_im,
abs_err`` and a ``manifest.json`` with the resolved parameters, errors,
metrics and wall time.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import CapExceededError
from .experiments import PRESETS, RunResult, default_config, run_experiment

ENV_OUT = "NGOSCHROD_OUT"
CONFIG_KEYS = ("eps", "qubits", "dt", "method", "lambda0", "recovery", "T", "ref_dt", "ref_qubits", "lam")


def _fmt(v) -> str:
    return format(float(v), ".17g")


def parse_qubits(items) -> dict:
    """``['x=4', 'p=9']`` or ``'x=4 p=9'`` to ``{'x': 4, 'p': 9}``."""
    if items is None:
        return {}
    if isinstance(items, str):
        items = items.replace(",", " ").split()
    out = {}
    for it in items:
        k, _, v = it.partition("=")
        if not k or not v:
            raise argparse.ArgumentTypeError(f"qubit spec must look like axis=count, got {it!r}")
        out[k.strip()] = int(v)
    return out


def _lambda0(s):
    return s if s in ("auto", None) else float(s)


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        k, sep, v = line.partition("=")
        k, v = k.strip(), v.strip()
        if not sep or k not in CONFIG_KEYS:
            raise ValueError(f"bad config line {line!r}")
        if k in ("qubits", "ref_qubits"):
            out[k] = parse_qubits(v)
        elif k in ("method", "recovery"):
            out[k] = v
        elif k == "lambda0":
            out[k] = _lambda0(v)
        else:
            out[k] = float(v)
    return out


def _overrides(args) -> dict:
    ov = read_config(args.config) if getattr(args, "config", None) else {}
    cli = {"eps": args.eps, "dt": args.dt, "method": args.method, "lambda0": _lambda0(args.lambda0),
           "recovery": args.recovery, "T": args.T}
    ov.update({k: v for k, v in cli.items() if v is not None})
    if args.qubits:
        q = dict(ov.get("qubits", {}))
        q.update(parse_qubits(args.qubits))
        ov["qubits"] = q
    return ov


def out_root(arg) -> Path:
    return Path(arg or os.environ.get(ENV_OUT, "runs"))


def run_dir_name(res: RunResult) -> str:
    return f"{res.config.preset}_eps{_fmt(res.config.eps)}"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v) if np.isfinite(v) else str(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (str, int, bool)) or v is None:
        return v
    return str(v)


def write_artifacts(res: RunResult, root: Path) -> Path:
    d = root / run_dir_name(res)
    d.mkdir(parents=True, exist_ok=True)
    for name, f in res.fields.items():
        keys = list(f.coords)
        vals = np.asarray(f.values).ravel()
        ref = None if f.reference is None else np.asarray(f.reference).ravel()
        lines = [",".join(keys + ["re", "im", "ref_re", "ref_im", "abs_err"])]
        for i in range(vals.size):
            row = [_fmt(f.coords[k][i]) for k in keys] + [_fmt(vals[i].real), _fmt(vals[i].imag)]
            if ref is None:
                row += ["", "", ""]
            else:
                row += [_fmt(ref[i].real), _fmt(ref[i].imag), _fmt(abs(vals[i] - ref[i]))]
            lines.append(",".join(row))
        (d / f"{name}.csv").write_text("\n".join(lines) + "\n")
    manifest = {"config": _jsonable(res.config.as_dict()), "errors": _jsonable(res.errors),
                "metrics": _jsonable(res.metrics), "wall_time": res.wall_time}
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return d


def summarize(root: Path) -> list[dict]:
    """One row per run directory, sorted by preset then eps."""
    rows = []
    if not root.exists():
        return rows
    for m in sorted(root.glob("*/manifest.json")):
        man = json.loads(m.read_text())
        cfg = man["config"]
        errs = [v for v in man.get("errors", {}).values() if isinstance(v, (int, float))]
        mets = man.get("metrics", {})
        rows.append({"preset": cfg["preset"], "eps": cfg["eps"],
                     "mesh": " ".join(f"{k}={v}" for k, v in sorted(cfg["qubits"].items())),
                     "max_err": max(errs) if errs else float("nan"),
                     "admissible": mets.get("admissible", ""), "wall_time": man.get("wall_time", 0.0)})
    rows.sort(key=lambda r: (r["preset"], r["eps"]))
    by = {}
    for r in rows:
        by.setdefault(r["preset"], []).append(r["max_err"])
    for r in rows:
        e = [x for x in by[r["preset"]] if np.isfinite(x) and x > 0]
        r["uniformity"] = (max(e) / min(e)) if len(e) > 1 else float("nan")
    return rows


def format_table(rows) -> str:
    head = ["preset", "eps", "mesh", "max_err", "admissible", "uniformity", "wall_time"]
    lines = ["\t".join(head)]
    for r in rows:
        lines.append("\t".join([r["preset"], f"{r['eps']:.6g}", r["mesh"], f"{r['max_err']:.3e}",
                                str(r["admissible"]), f"{r['uniformity']:.3g}", f"{r['wall_time']:.2f}"]))
    return "\n".join(lines)


def _run_one(preset, ov, root):
    res = run_experiment(default_config(preset, **ov))
    d = write_artifacts(res, root)
    return str(d), res.errors, res.wall_time


def _add_common(p):
    p.add_argument("--eps", type=float, help="oscillation parameter")
    p.add_argument("--qubits", nargs="+", metavar="AXIS=N", help="qubit counts, e.g. x=4 p=9")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--method", choices=["spectral", "upwind"])
    p.add_argument("--lambda0", help="'auto' or a number")
    p.add_argument("--recovery", choices=["point", "integral"])
    p.add_argument("--T", type=float, help="final time")
    p.add_argument("--config", help="key = value file")
    p.add_argument("--out", help=f"output root (default ${ENV_OUT} or ./runs)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ngoschrod", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("run", help="run one preset")
    p.add_argument("preset", choices=sorted(PRESETS))
    _add_common(p)
    p = sub.add_parser("scan", help="run a preset over several eps values")
    p.add_argument("preset", choices=sorted(PRESETS))
    p.add_argument("--eps-list", required=True, help="comma-separated eps values")
    p.add_argument("--workers", type=int, default=1)
    _add_common(p)
    p = sub.add_parser("report", help="summarise run directories")
    p.add_argument("dir", nargs="?")
    p = sub.add_parser("resources", help="resource estimates for the variable-speed assembly")
    _add_common(p)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "report":
            print(format_table(summarize(out_root(args.dir))))
            return 0
        ov = _overrides(args)
        root = out_root(args.out)
        if args.cmd == "resources":
            res = run_experiment(default_config("resources", **ov))
            print(json.dumps(_jsonable(res.metrics), indent=2, sort_keys=True))
            return 0
        if args.cmd == "run":
            d, errs, wt = _run_one(args.preset, ov, root)
            print(d)
            for k, v in sorted(errs.items()):
                print(f"{k}\t{v:.3e}")
            return 0
        eps_list = [float(e) for e in args.eps_list.split(",") if e.strip()]
        jobs = [(args.preset, {**ov, "eps": e}, root) for e in eps_list]
        if args.workers > 1:
            with ProcessPoolExecutor(args.workers) as ex:
                outs = list(ex.map(_run_one, *zip(*jobs)))
        else:
            outs = [_run_one(*j) for j in jobs]
        for d, errs, wt in outs:
            print(d, " ".join(f"{k}={v:.3e}" for k, v in sorted(errs.items())))
        return 0
    except (CapExceededError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
