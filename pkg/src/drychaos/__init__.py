"""Return-map analysis of a harmonically forced mass on a dry-friction delimiter."""

from .dynamics import THETA0, Params, derived_phases
from .return_map import Scenario, return_T

__all__ = ["THETA0", "Params", "Scenario", "derived_phases", "return_T"]
__version__ = "0.1.0"
