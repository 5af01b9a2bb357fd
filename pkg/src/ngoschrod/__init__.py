"""Classical emulation of Schrodingerisation for oscillatory transport problems."""

from .spectral import FourierAxis, collocation_ops, make_axis, sample_diag, upwind_ops
from .schrodingerize import (
    ExtendedState,
    HermitianSplit,
    HomogenizedSystem,
    SchrodSystem,
    choose_p_domain,
    extension_profile,
    hermitian_split,
    homogenize,
    schrodingerize,
    suggest_lambda0,
)
from .evolve import EvolutionConfig, evolve, implicit_midpoint_step, p_star, recover
from .scalar import ScalarProblem, characteristics_oracle, solve_scalar
from .twoband import TwoBandProblem, assemble_two_band, solve_two_band
from .hopping import HoppingProblem, assemble_hopping, paper_problem, solve_hopping
from .resources import check_bounds, hamiltonian_stats, resource_report
from .experiments import ExperimentConfig, PRESETS, default_config, run_experiment

__version__ = "0.1.0"
