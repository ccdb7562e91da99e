"""Finite-element toolkit for the discrete brittle-damage energy and its Gamma-limits."""

from .densities import (
    INFINITY,
    Hooke,
    RegimeParams,
    Sym2,
    apply_hooke,
    g,
    h,
    hashin_shtrikman,
    k_set,
    phi,
    phi1d,
    quad_form,
    sqw1d,
    sqw2d,
    wbar,
    wbar_recession,
)
from .errors import (
    BudgetError,
    ConvergenceError,
    CSVParseError,
    GammaDamageError,
    GeometryError,
    ParameterError,
    RegimeError,
    UnsupportedModeError,
    UsageError,
)
from .fem import (
    DamageField,
    DisplacementField,
    EnergyBreakdown,
    alt_minimize,
    energy,
    optimal_chi,
    solve_elastic,
    sym_grad,
)
from .harness import Regime, ScalingLaw, classify_regime, emit_plot, run_sweep
from .mesh import (
    Triangulation,
    cohesive_mesh,
    double_stripe_mesh,
    jump_strip_mesh,
    stripe_mesh,
    uniform_mesh,
    validate,
)
from .oned import Pattern1D, Subdivision1D, brute_min_1d, recover_affine_1d, recover_step_1d, wbar_1d
from .recovery import recover_elastic, recover_jump, recover_lamination, recover_trivial

__version__ = "0.1.0"

__all__ = [
    "INFINITY", "Hooke", "RegimeParams", "Sym2", "apply_hooke", "g", "h", "hashin_shtrikman",
    "k_set", "phi", "phi1d", "quad_form", "sqw1d", "sqw2d", "wbar", "wbar_recession",
    "BudgetError", "ConvergenceError", "CSVParseError", "GammaDamageError", "GeometryError",
    "ParameterError", "RegimeError", "UnsupportedModeError", "UsageError",
    "DamageField", "DisplacementField", "EnergyBreakdown", "alt_minimize", "energy", "optimal_chi",
    "solve_elastic", "sym_grad",
    "Regime", "ScalingLaw", "classify_regime", "emit_plot", "run_sweep",
    "Triangulation", "cohesive_mesh", "double_stripe_mesh", "jump_strip_mesh", "stripe_mesh",
    "uniform_mesh", "validate",
    "Pattern1D", "Subdivision1D", "brute_min_1d", "recover_affine_1d", "recover_step_1d", "wbar_1d",
    "recover_elastic", "recover_jump", "recover_lamination", "recover_trivial",
]
