"""Named experiments: problem set-ups, solves and comparisons.

Each runner takes an :class:`ExperimentConfig` and returns a
:class:`RunResult` holding sampled fields with their references, max-norm
errors and auxiliary metrics.  The CLI and the scripts only format these.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import CapExceededError
from .evolve import EvolutionConfig, evolve, recovery_scan
from .hopping import densities, paper_problem, reference_split_solver, solve_hopping
from .resources import resource_report
from .scalar import ScalarProblem, build_mode_systems, characteristics_oracle, secular_slope, solve_scalar
from .schrodingerize import SchrodSystem, extension_profile, hermitian_split
from .spectral import make_axis
from .twoband import TwoBandProblem, detect_unitary_case, reference_split_two_band, solve_two_band

__all__ = ["ExperimentConfig", "FieldData", "RunResult", "PRESETS", "QUBIT_CAP", "HOPPING_LAMBDA0",
           "default_config", "run_experiment", "scalar_problem", "twoband_problem", "with_eps"]

QUBIT_CAP = 22
# sup |b| / sqrt(2) for b = -sin(v + 1)/2
HOPPING_LAMBDA0 = math.sqrt(2) / 4


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved parameters of one run.  ``qubits`` maps axis names to qubit counts."""

    preset: str
    eps: float
    qubits: dict
    T: float = 1.0
    dt: float = 1e-3
    method: str = "spectral"
    lambda0: str | float = "auto"
    recovery: str = "point"
    lam: float = 1.0
    ref_dt: float = 1e-4
    ref_qubits: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        total = sum(int(v) for v in self.qubits.values())
        if total > QUBIT_CAP:
            raise CapExceededError(f"{total} qubits requested, cap is {QUBIT_CAP}")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class FieldData:
    """Samples on a grid; ``coords`` maps coordinate names to flattened arrays."""

    coords: dict
    values: np.ndarray
    reference: np.ndarray | None = None

    @property
    def abs_error(self):
        if self.reference is None:
            return None
        return np.abs(self.values - self.reference)


@dataclass
class RunResult:
    config: ExperimentConfig
    fields: dict
    errors: dict
    metrics: dict = field(default_factory=dict)
    wall_time: float = 0.0


def _grid1(x):
    return {"x": np.asarray(x, float)}


def _relerr(u, ref):
    return float(np.max(np.abs(u - ref)) / np.max(np.abs(ref)))


# ---------------------------------------------------------------------------
# problem factories


def _g(x):
    return 1 + 0.5 * np.cos(2 * x) + 1j * (1 + 0.5 * np.sin(2 * x))


def scalar_problem(kind: str, eps: float, m: int, lam: float = 1.0) -> ScalarProblem:
    """Scalar benchmarks on ``[-pi/2, pi/2]``.

    ``'const'``: ``c = a = 1``, non-oscillatory data.  ``'oscillatory'``: the
    same coefficients with data ``g(x) e^{i x/eps}``.  ``'variable'``:
    ``c = cos^2 x`` and ``a = 1.5 + cos 2x``.
    """
    ax = make_axis(-np.pi / 2, np.pi / 2, m)
    one = lambda x: np.ones_like(np.asarray(x, float))
    if kind == "const":
        return ScalarProblem(one, one, lam, eps, lambda x, t: _g(x) + 0 * t, lambda x: 0 * x, ax)
    if kind == "oscillatory":
        return ScalarProblem(one, one, lam, eps, lambda x, t: _g(x) * np.exp(1j * t), lambda x: x, ax, K=1)
    if kind == "variable":
        return ScalarProblem(lambda x: np.cos(x) ** 2, lambda x: 1.5 + np.cos(2 * x), lam, eps,
                             lambda x, t: _g(x) + 0 * t, lambda x: 0 * x, ax)
    raise ValueError(f"unknown scalar problem {kind!r}")


C_UNITARY = np.array([[0, 1], [-1, 0]], complex)
C_DISSIPATIVE = 0.5 * np.array([[1 + 1j, 1 + 1j], [-1 + 1j, 1 - 1j]])


def twoband_problem(C, eps: float, m_x: int = 4, m_tau: int = 3) -> TwoBandProblem:
    """Two-band benchmark: ``a = (1, 4)``, ``E = 1.5 + cos x`` on ``[0, 2 pi]``, exact phase."""
    f = lambda x: 1 + 0.5 * np.cos(x) + 1j * np.sin(x)
    return TwoBandProblem(
        a1=lambda x: 1.0 + 0 * x, a2=lambda x: 4.0 + 0 * x,
        E=lambda t, x: 1.5 + np.cos(x) + 0 * t, C=np.asarray(C), eps=eps, f1in=f, f2in=f,
        x_axis=make_axis(0, 2 * np.pi, m_x), tau_axis=make_axis(0, 2 * np.pi, m_tau),
        dEdx=lambda t, x: -np.sin(x) + 0 * t,
        S_exact=lambda t, x: 1.5 * t + (np.sin(x) - np.sin(x - 4 * t)) / 4,
        dSdx_exact=lambda t, x: (np.cos(x) - np.cos(x - 4 * t)) / 4)


# ---------------------------------------------------------------------------
# runners


def _run_scalar_constant(cfg: ExperimentConfig, kind: str) -> RunResult:
    pb = scalar_problem(kind, cfg.eps, cfg.qubits["x"], cfg.lam)
    sol = solve_scalar(pb, cfg.method, EvolutionConfig(dt=cfg.dt), cfg.T, recovery=cfg.recovery)
    u = sol.u(cfg.eps)
    ex = pb.exact_constant(cfg.T)
    x = pb.x_axis.nodes
    fields = {"u": FieldData(_grid1(x), u, ex)}
    metrics = {"modes": [int(k) for k in sol.ks]}
    ax = pb.x_axis
    kappa = secular_slope(pb.beta, ax)
    for i, k in enumerate(sol.ks):
        if np.max(np.abs(sol.alpha[i])) < 1e-12:
            continue
        # discrete L2 norms of the x-derivatives; the secular part k*kappa*x is removed from S
        S_per = np.real(sol.S[i]) - k * kappa * x
        metrics[f"dx_alpha_{k}"] = float(np.linalg.norm(ax.derivative(sol.alpha[i])) * math.sqrt(ax.step))
        metrics[f"dx_S_{k}"] = float(np.linalg.norm(ax.derivative(S_per)) * math.sqrt(ax.step))
    return RunResult(cfg, fields, {"u": _relerr(u, ex)}, metrics)


def _run_scalar_variable(cfg: ExperimentConfig) -> RunResult:
    pb = scalar_problem("variable", cfg.eps, cfg.qubits["x"], cfg.lam)
    pax = make_axis(-10, 10, cfg.qubits["p"])
    lam0 = cfg.lambda0 if cfg.lambda0 == "auto" else float(cfg.lambda0)
    sol = solve_scalar(pb, cfg.method, EvolutionConfig(dt=cfg.dt), cfg.T, lambda0=lam0, p_axis=pax,
                       recovery=cfg.recovery)
    aex, Sex = characteristics_oracle(pb, cfg.T, sol.ks)
    x = pb.x_axis.nodes
    u = sol.u(cfg.eps)
    uref = np.sum(aex * np.exp(1j * Sex / cfg.eps), axis=0)
    H1 = build_mode_systems(pb, cfg.method).alpha_split().H1
    ev = np.linalg.eigvalsh(H1)
    scan = recovery_scan(sol.info["alpha_states"][0], None, aex[0], ["dp"], pstar=sol.info["alpha_pstar"])
    fields = {"u": FieldData(_grid1(x), u, uref), "alpha": FieldData(_grid1(x), sol.alpha[0], aex[0]),
              "S": FieldData(_grid1(x), sol.S[0].astype(complex), Sex[0].astype(complex))}
    errors = {"u": _relerr(u, uref), "alpha": float(np.max(np.abs(sol.alpha[0] - aex[0]))),
              "S": float(np.max(np.abs(sol.S[0] - Sex[0])))}
    metrics = {"lambda_n": float(ev[-1]), "lambda_1": float(ev[0]), "lambda_n_formula": 113 / 30 - cfg.lam,
               "lambda0": sol.info["alpha_lambda0"], "p_star": sol.info["alpha_pstar"],
               "admissible": scan["dp"].card, "dp": pax.step}
    return RunResult(cfg, fields, errors, metrics)


def _run_scan_lambda0(cfg: ExperimentConfig) -> RunResult:
    """Admissible-set cardinalities of the amplitude recovery over a grid of shifts.

    Only the amplitude system is lifted; each shift gets its own ``p*``.
    """
    lams = (-1.0, 4.0, -4.0)
    rules = ("dp", "dp2", "dp_rel")
    pax = make_axis(-10, 10, cfg.qubits["p"])
    prof = extension_profile("cubic")
    rows, spectra, fields = [], {}, {}
    for lam in lams:
        pb = scalar_problem("variable", cfg.eps, cfg.qubits["x"], lam)
        aex, _ = characteristics_oracle(pb, cfg.T)
        sys_ = build_mode_systems(pb, cfg.method)
        split = sys_.alpha_split()
        ev = np.linalg.eigvalsh(split.H1)
        spectra[f"{lam:g}"] = {"lambda_1": float(ev[0]), "lambda_n": float(ev[-1])}
        shifts = np.unique(np.round(np.concatenate([[0.0], np.linspace(-6 - lam, 6 - lam, 13),
                                                    np.linspace(0.5 * (ev[0] + ev[-1]), ev[-1], 5)]), 12))
        cards = []
        for l0 in shifts:
            S_ = SchrodSystem(split.H1, split.H2, pax, float(l0), prof, cfg.T)
            out = evolve(S_, S_.initial_state(sys_.alpha0[0]), cfg.T, EvolutionConfig(dt=cfg.dt))
            ps = max((ev[-1] - l0) * cfg.T, 0.0)
            sc = recovery_scan(out, None, aex[0], rules, pstar=ps)
            cards.append([sc[r].card for r in rules])
            rows.append({"lam": lam, "lambda0": float(l0), "p_star": ps, **{r: sc[r].card for r in rules}})
        cards = np.array(cards, float)
        fields[f"cards_lam{lam:g}"] = FieldData({"lambda0": shifts}, cards[:, 0] + 1j * 0, None)
    return RunResult(cfg, fields, {}, {"table": rows, "spectra": spectra})


def _run_twoband(cfg: ExperimentConfig, C) -> RunResult:
    pb = twoband_problem(C, cfg.eps, cfg.qubits["x"], cfg.qubits["tau"])
    kw = {}
    if "p" in cfg.qubits:
        kw["p_axis"] = make_axis(-5, 5, cfg.qubits["p"])
    lam0 = cfg.lambda0 if cfg.lambda0 == "auto" else float(cfg.lambda0)
    sol = solve_two_band(pb, cfg.method, EvolutionConfig(dt=cfg.dt), cfg.T, lambda0=lam0,
                         recovery=cfg.recovery, **kw)
    mref = cfg.ref_qubits.get("x", 8)
    xr, ur = reference_split_two_band(pb, cfg.T, mref, cfg.ref_dt)
    stride = 2 ** (mref - cfg.qubits["x"])
    ref = ur[:, ::stride]
    x = pb.x_axis.nodes
    fields = {"u1": FieldData(_grid1(x), sol.u[0], ref[0]), "u2": FieldData(_grid1(x), sol.u[1], ref[1])}
    errors = {k: float(np.max(np.abs(f.values - f.reference))) for k, f in fields.items()}
    metrics = {"unitary_case": bool(detect_unitary_case(pb.C)),
               **{k: v for k, v in sol.info.items() if isinstance(v, (bool, int, float, str))}}
    return RunResult(cfg, fields, errors, metrics)


def _run_hopping(cfg: ExperimentConfig) -> RunResult:
    q = cfg.qubits
    pb = paper_problem(cfg.eps, q["tau"], q["v"], q["x"])
    lam0 = cfg.lambda0 if cfg.lambda0 == "auto" else float(cfg.lambda0)
    sol = solve_hopping(pb, cfg.T, cfg.dt, lambda0=lam0, n=q["p"])
    mx = cfg.ref_qubits.get("x", 6)
    mv = cfg.ref_qubits.get("v", q["v"])
    _, _, fr = reference_split_solver(pb, cfg.T, cfg.ref_dt, mx, mv)
    ref = fr[:, :: 2 ** (mx - q["x"]), :: 2 ** (mv - q["v"])]
    rho = densities(sol.f, pb.v_axis)
    rho_ref = densities(ref, pb.v_axis)
    x = pb.x_axis.nodes
    names = ("plus", "minus", "i")
    fields = {f"rho_{n}": FieldData(_grid1(x), rho[i], rho_ref[i]) for i, n in enumerate(names)}
    X, V = pb.grid
    for i, n in enumerate(names):
        fields[f"f_{n}"] = FieldData({"x": X.ravel(), "v": V.ravel()}, sol.f[i].ravel(), ref[i].ravel())
    errors = {f"rho_{n}": _relerr(rho[i], rho_ref[i]) for i, n in enumerate(names)}
    metrics = {"lambda_n": sol.info["lambda_n"], "imag_f_pm": sol.info["imag_f_pm"],
               "lambda0": sol.info.get("lambda0")}
    return RunResult(cfg, fields, errors, metrics)


def _run_resources(cfg: ExperimentConfig) -> RunResult:
    pb = scalar_problem("variable", cfg.eps, cfg.qubits["x"], cfg.lam)
    pax = make_axis(-10, 10, cfg.qubits["p"])
    M1 = build_mode_systems(pb, cfg.method).M1
    sp_ = hermitian_split(M1)
    lam0 = 0.0 if cfg.lambda0 == "auto" else float(cfg.lambda0)
    S_ = SchrodSystem(sp_.H1, sp_.H2, pax, lam0, extension_profile("cubic"), cfg.T)
    rep = resource_report(S_, cfg.T, 1e-3, m_x=2 ** cfg.qubits["x"])
    return RunResult(cfg, {}, {}, rep.as_dict())


PRESETS = {
    "scalar-const": (dict(eps=0.01, qubits={"x": 4}), lambda c: _run_scalar_constant(c, "const")),
    "scalar-const-oscillatory": (dict(eps=0.01, qubits={"x": 5}),
                                 lambda c: _run_scalar_constant(c, "oscillatory")),
    "scalar-variable": (dict(eps=0.01, qubits={"x": 4, "p": 9}), _run_scalar_variable),
    "scan-lambda0": (dict(eps=0.01, qubits={"x": 4, "p": 9}), _run_scan_lambda0),
    "twoband-unitary": (dict(eps=0.01, qubits={"x": 4, "tau": 3}),
                        lambda c: _run_twoband(c, C_UNITARY)),
    "twoband-schrod": (dict(eps=0.01, qubits={"x": 4, "tau": 3, "p": 8}, lambda0=0.5),
                       lambda c: _run_twoband(c, C_DISSIPATIVE)),
    "hopping-eps1": (dict(eps=1.0, T=2.0, dt=0.02, lambda0=HOPPING_LAMBDA0,
                          qubits={"tau": 3, "v": 4, "x": 4, "p": 7},
                          ref_dt=0.005, ref_qubits={"x": 6, "v": 4}), _run_hopping),
    "hopping-eps32": (dict(eps=1 / 32, T=2.0, dt=0.02, lambda0=HOPPING_LAMBDA0,
                           qubits={"tau": 3, "v": 6, "x": 4, "p": 8},
                           ref_dt=1e-4, ref_qubits={"x": 8, "v": 6}), _run_hopping),
    "resources": (dict(eps=0.01, qubits={"x": 4, "p": 9}), _run_resources),
}


def default_config(preset: str, **overrides) -> ExperimentConfig:
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    base = dict(PRESETS[preset][0])
    qub = dict(base.pop("qubits"))
    qub.update(overrides.pop("qubits", None) or {})
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(preset=preset, qubits=qub, **base)


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    t0 = time.perf_counter()
    res = PRESETS[cfg.preset][1](cfg)
    res.wall_time = time.perf_counter() - t0
    return res


def with_eps(cfg: ExperimentConfig, eps: float) -> ExperimentConfig:
    return replace(cfg, eps=float(eps))
