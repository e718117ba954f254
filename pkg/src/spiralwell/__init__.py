"""spiralwell: a damped particle on the cylinder in a flat-axis spiral
potential, with the diagnostics that make its escape structure visible.

The potential V(x, y) = -exp(-lam/y^2) sin(x + mu/y) is flat on the axis
y = 0 and carved into a spiral valley off it.  Rest starts in the valley
have strictly negative energy, dissipate monotonically, and must escape
through y = 1; deeper starts take longer, wind farther around the
cylinder, and their near-axis passage angles fill the axis circle.  The
package integrates the motion (adaptive RK 5(4) with dense output and
event detection, compiled kernel with pure-Python fallback), audits the
energy laws, sweeps families of starts, recenters runs at their hitting
times, measures winding and angular coverage, and reconstructs the
corresponding equivariant annulus maps and tangent-map candidates.
"""

from ._version import __version__
from .backends import BACKEND, available_backends
from .construction import (FamilyMember, FamilySpec, LimitSetReport,
                           RecenteredRun, SweepEntry, WindingReport,
                           cauchy_gap, family_initial, initial_at_height,
                           limit_set_coverage, recenter, sweep_hitting_times,
                           tangent_limit_candidates, winding)
from .dynamics import (BlowupError, EventRecord, EventSpec, IntegratorConfig,
                       NegativeEnergyRequired, State, StepUnderflowError,
                       Trajectory, VelocityBoundReport, ZeroSetGuardReport,
                       dissipation_residual, explore_backward, integrate,
                       integrate_fixed, physical_energy, rhs,
                       velocity_bound_check, zero_set_guard)
from .geometry import (EquivariantMap, TangentMap, energy_term_comparison,
                       evaluate_map, full_energy_quadrature, reduced_energy,
                       tangent_map_from_angle)
from .potential import (CylinderPoint, PotentialParams, ZeroSetBranch,
                        eval_V, grad_V, in_negative_region,
                        metric_coefficient, zero_set_curves)

__all__ = [
    "__version__", "BACKEND", "available_backends",
    "PotentialParams", "CylinderPoint", "ZeroSetBranch",
    "eval_V", "grad_V", "metric_coefficient", "in_negative_region",
    "zero_set_curves",
    "State", "IntegratorConfig", "EventSpec", "EventRecord", "Trajectory",
    "integrate", "integrate_fixed", "explore_backward", "rhs",
    "physical_energy", "dissipation_residual", "velocity_bound_check",
    "zero_set_guard", "VelocityBoundReport", "ZeroSetGuardReport",
    "BlowupError", "StepUnderflowError", "NegativeEnergyRequired",
    "FamilySpec", "FamilyMember", "SweepEntry", "RecenteredRun",
    "WindingReport", "LimitSetReport",
    "family_initial", "initial_at_height", "sweep_hitting_times", "recenter",
    "cauchy_gap", "winding", "limit_set_coverage", "tangent_limit_candidates",
    "EquivariantMap", "TangentMap", "evaluate_map", "reduced_energy",
    "full_energy_quadrature", "tangent_map_from_angle",
    "energy_term_comparison",
]
