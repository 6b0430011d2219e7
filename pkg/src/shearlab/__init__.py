"""Exact and certified computations with shears, overshears and translations on complex space."""

from .densegroup import (
    ScheduleInfeasible,
    ShearTarget,
    TargetUnreachable,
    conjugation_orbit,
    schedule_build,
    two_generator_experiment,
)
from .polycore import EXACT, FLOAT, QQi, SparsePoly, parse_poly
from .regions import GridSpec, Polydisc
from .runge import RungeInfeasible, birkhoff_pair, blend_coefficient, runge_piecewise
from .shearcalc import AutWord, OvershearGen, SemiSymbolicMap, make_F, make_cyclic_I, make_shear
from .translations import DanielewskiSurface, DiagonalTranslation, escape_index, zajac_check

__all__ = [
    "AutWord", "DanielewskiSurface", "DiagonalTranslation", "EXACT", "FLOAT", "GridSpec",
    "OvershearGen", "Polydisc", "QQi", "RungeInfeasible", "ScheduleInfeasible",
    "SemiSymbolicMap", "ShearTarget", "SparsePoly", "TargetUnreachable", "birkhoff_pair",
    "blend_coefficient", "conjugation_orbit", "escape_index", "make_F", "make_cyclic_I",
    "make_shear", "parse_poly", "runge_piecewise", "schedule_build", "two_generator_experiment",
    "zajac_check",
]
