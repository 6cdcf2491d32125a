"""Rate-induced tipping diagnostics for scalar nonautonomous ODEs.

Detects, classifies, and localizes rate-induced tipping in systems
ẋ = f(x, Λ(rt)) whose parameter ramp Λ limits to frozen values at ±∞:
quasi-static branch tracing, asymptotic-series approximations of the
pullback attracting/repelling solutions, finite-time sign diagnostics,
and bisection for the critical rate.
"""

from .errors import (ConvergenceError, MathPreconditionError, RatetipError,
                     UsageError)
from .model import (ModelSpec, PolynomialField, RampFunction, frozen_quad,
                    get_model, parse_model_file, quad_arctan, quad_tanh,
                    validate_ramp)
from .equilibria import (QuasiStaticBranch, branches_for, find_equilibria,
                         min_branch_gap, trace_branch, trace_both_branches)
from .integrate import (PullbackSolution, Trajectory, TrajectoryStatus,
                        estimate_pullback_attractor,
                        estimate_pullback_repeller, solve_ivp)
from .asymptotics import (SeriesApproximation, SeriesCoefficients,
                          build_series_approximation, compute_coefficients,
                          estimate_error_constant, partial_sum,
                          validity_radius)
from .tipping import (Classification, DiscriminantSample, ProbeConfig,
                      TippingReport, d_in, d_out, delta_curve, detect_tipping,
                      end_point_tracking_check, indicator_crossing,
                      late_proximity_check, probe_solutions,
                      stability_indicator)

__version__ = "0.1.0"

__all__ = [
    "Classification", "ConvergenceError", "DiscriminantSample",
    "MathPreconditionError", "ModelSpec", "PolynomialField", "ProbeConfig",
    "PullbackSolution", "QuasiStaticBranch", "RampFunction", "RatetipError",
    "SeriesApproximation", "SeriesCoefficients", "TippingReport",
    "Trajectory", "TrajectoryStatus", "UsageError",
    "branches_for", "build_series_approximation", "compute_coefficients",
    "d_in", "d_out", "delta_curve", "detect_tipping",
    "end_point_tracking_check", "estimate_error_constant",
    "estimate_pullback_attractor", "estimate_pullback_repeller",
    "find_equilibria", "frozen_quad", "get_model", "indicator_crossing",
    "late_proximity_check", "min_branch_gap", "parse_model_file",
    "partial_sum", "probe_solutions", "quad_arctan", "quad_tanh",
    "solve_ivp", "stability_indicator", "trace_branch",
    "trace_both_branches", "validate_ramp", "validity_radius",
    "__version__",
]
