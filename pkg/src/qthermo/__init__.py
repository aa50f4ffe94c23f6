"""Quenched thermodynamic formalism for random interval maps.

Transfer-operator cocycles on grid functions, random conformal and invariant
measures, expected pressure, Lasota-Yorke constants, cone contraction
diagnostics and validators for the standard example families.
"""

from .bvfunc import GridFunction, bv_stats, grid_function, indicator, variation
from .driving import DrivingProcess, constant_process, iid_process, make_driving, make_fiber_spec
from .maps import covering_bounds, covering_time, make_fiber_map, preimages, refine_partition, tau
from .potentials import PotentialSpec, birkhoff_weight, contracting_report, summability_report
from .transfer import apply_cocycle, apply_transfer, estimate_cocycle, transfer_matrix
from .measures import (ConformalFunctional, correlation_sequence, equilibrium_identity_check,
                       expected_pressure, invariant_eval)
from .cones import ConeParams, cone_contraction_diagnostic, theta_a, theta_plus
from .lyconsts import (GoodFiberParams, build_partition, find_Nstar, good_fiber_check, ly_constants,
                       verify_ly)
from .examples import validate_example, zeta_minus_one

__version__ = "0.1.0"

__all__ = [
    "GridFunction",
    "bv_stats",
    "grid_function",
    "indicator",
    "variation",
    "DrivingProcess",
    "constant_process",
    "iid_process",
    "make_driving",
    "make_fiber_spec",
    "covering_bounds",
    "covering_time",
    "make_fiber_map",
    "preimages",
    "refine_partition",
    "tau",
    "PotentialSpec",
    "birkhoff_weight",
    "contracting_report",
    "summability_report",
    "apply_cocycle",
    "apply_transfer",
    "estimate_cocycle",
    "transfer_matrix",
    "ConformalFunctional",
    "correlation_sequence",
    "equilibrium_identity_check",
    "expected_pressure",
    "invariant_eval",
    "ConeParams",
    "cone_contraction_diagnostic",
    "theta_a",
    "theta_plus",
    "GoodFiberParams",
    "build_partition",
    "find_Nstar",
    "good_fiber_check",
    "ly_constants",
    "verify_ly",
    "validate_example",
    "zeta_minus_one",
]
