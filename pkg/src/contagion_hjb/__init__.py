"""Optimal insurer investment and risk control under regime switching and
default contagion: recursive value-factor solver, feedback policies, and
Monte Carlo verification."""

__version__ = "0.1.0"

from .config import data_path, load_params
from .hjb import (
    PolicySurface,
    StateSolution,
    ValueSurface,
    build_A_general,
    build_A_terminal,
    psi_floor,
    solve_all,
    solve_state,
    solve_terminal_state,
)
from .model import (
    ConfigError,
    DefaultState,
    ModelParams,
    NumericalError,
    ParameterError,
    all_states,
    flip,
    states_by_defaults_desc,
    theta,
    validate,
)
from .numerics import TimeGrid, check_type_K, expm, integrate_backward, integrate_forward
from .policy import (
    PolicyPoint,
    hamiltonian_terminal,
    maximize_hamiltonian,
    maximize_terminal,
)
from .simulate import (
    ConstantPolicy,
    SimConfig,
    SimReport,
    SurfacePolicy,
    homogeneity_check,
    simulate,
    zero_policy,
)
from .sweep import SweepSpec, apply_target, load_sweep_spec, run_sweep

__all__ = [
    "__version__",
    "ConfigError",
    "ConstantPolicy",
    "DefaultState",
    "ModelParams",
    "NumericalError",
    "ParameterError",
    "PolicyPoint",
    "PolicySurface",
    "SimConfig",
    "SimReport",
    "StateSolution",
    "SurfacePolicy",
    "SweepSpec",
    "TimeGrid",
    "ValueSurface",
    "all_states",
    "apply_target",
    "build_A_general",
    "build_A_terminal",
    "check_type_K",
    "data_path",
    "expm",
    "flip",
    "hamiltonian_terminal",
    "homogeneity_check",
    "integrate_backward",
    "integrate_forward",
    "load_params",
    "load_sweep_spec",
    "maximize_hamiltonian",
    "maximize_terminal",
    "psi_floor",
    "run_sweep",
    "simulate",
    "solve_all",
    "solve_state",
    "solve_terminal_state",
    "states_by_defaults_desc",
    "theta",
    "validate",
    "zero_policy",
]
