"""Time integration for ẋ = f(x, Λ(rt)) and pullback solution estimates.

Wraps an adaptive embedded Runge–Kutta 5(4) pair (SciPy's RK45) with
dense output and finite-escape detection, and builds on it the anchored
iteration that estimates the locally pullback attracting solution x^r_−
(forward, anchors pushed to −∞) and the locally pullback repelling
solution x^r_+ (backward, anchors pushed to +∞).  These estimates serve
as the ground-truth oracle for the series approximations and the tipping
diagnostics.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.integrate as spi

from .equilibria import QuasiStaticBranch, branches_for
from .errors import NoConvergence, ToleranceFailure, UsageError
from .model import ModelSpec, PolynomialField

#: Default local tolerance for a single initial-value solve.
DEFAULT_IVP_TOLERANCE = 1e-8

#: Escape is declared when |x| crosses this fraction of the bounding box.
ESCAPE_FRACTION = 0.99

#: Anchor spacing Δs = PULLBACK_SPACING_FACTOR / r.
PULLBACK_SPACING_FACTOR = 10.0

#: Give up the anchored iteration after this many anchors.
PULLBACK_MAX_ANCHORS = 50

#: Number of checkpoints on which successive anchored runs are compared.
PULLBACK_CHECKPOINTS = 33

#: Number of samples stored for the final windowed pullback trajectory.
PULLBACK_SAMPLES = 2001

# The anchored iteration compares runs at the requested tolerance; the
# underlying solver runs tighter so solver noise cannot mask convergence.
_SOLVER_SAFETY = 50.0


class TrajectoryStatus(enum.Enum):
    COMPLETED = "completed"
    ESCAPED = "escaped"
    TOLERANCE_FAILURE = "tolerance_failure"


class PullbackSide(enum.Enum):
    ATTRACTOR = "attractor"
    REPELLER = "repeller"


@dataclass
class Trajectory:
    """A single numerical solution of ẋ = f(x, Λ(rt)).

    Samples are stored sorted by time regardless of integration
    direction.  ``at`` evaluates the dense interpolant inside the
    sampled span; escape status means the last (first, for backward
    runs) sample sits on the escape threshold.
    """

    r: float
    t0: float
    x0: float
    t: np.ndarray
    x: np.ndarray
    status: TrajectoryStatus
    tol: float
    t_escape: float | None = None
    escape_sign: int = 0
    dense: object = dc_field(default=None, repr=False)

    @property
    def t_begin(self) -> float:
        return float(self.t[0])

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def at(self, times):
        """Dense evaluation x(t); `times` may be scalar or array."""
        scalar = np.ndim(times) == 0
        ts = np.atleast_1d(np.asarray(times, dtype=float))
        slack = 1e-9 * max(1.0, self.t_end - self.t_begin)
        if ts.min() < self.t_begin - slack or ts.max() > self.t_end + slack:
            raise UsageError(
                f"evaluation time outside [{self.t_begin}, {self.t_end}]")
        if self.dense is not None:
            out = np.asarray(self.dense(ts))
            out = out[0] if out.ndim == 2 else out
        else:
            out = np.interp(ts, self.t, self.x)
        return float(out[0]) if scalar else out

    def csv_rows(self):
        """Rows (t, x) for delimited export."""
        return list(zip(self.t.tolist(), self.x.tolist()))


def _make_rhs(model: ModelSpec, r: float):
    """Build a fast scalar-callback right-hand side for the solver."""
    fld = model.field
    ramp_eval = model.ramp.eval
    if isinstance(fld, PolynomialField):
        terms = list(fld.terms.items())

        def rhs(t, y):
            lam = ramp_eval(r * t)
            x = y[0]
            acc = 0.0
            for (i, j), c in terms:
                acc += c * x**i * lam**j
            return (acc,)

        return rhs

    def rhs(t, y):  # pragma: no cover - generic fallback
        return (fld.eval(y[0], ramp_eval(r * t)),)

    return rhs


def _escape_events(model: ModelSpec):
    x_min, x_max, _, _ = model.field.bound_box
    hi = ESCAPE_FRACTION * x_max
    lo = ESCAPE_FRACTION * x_min

    def hit_upper(t, y):
        return y[0] - hi

    def hit_lower(t, y):
        return y[0] - lo

    hit_upper.terminal = True
    hit_lower.terminal = True
    return hit_upper, hit_lower, hi, lo


def solve_ivp(model: ModelSpec, r: float, t0: float, x0: float, t1: float,
              tol: float = DEFAULT_IVP_TOLERANCE, *, t_eval=None,
              max_step: float | None = None) -> Trajectory:
    """Integrate ẋ = f(x, Λ(rt)) from (t0, x0) to t1 (backward allowed).

    Uses an adaptive RK5(4) pair with per-step local error ≤ tol and
    dense output.  Integration stops early, with status ``ESCAPED`` and
    the crossing time located within one step, when |x| reaches
    ``ESCAPE_FRACTION`` of the field's bounding box.

    Raises ToleranceFailure if the step size underflows.
    """
    if r <= 0:
        raise UsageError("rate parameter r must be positive")
    if tol <= 0:
        raise UsageError("tolerance must be positive")
    if t1 == t0:
        raise UsageError("t1 must differ from t0")
    hit_upper, hit_lower, hi, lo = _escape_events(model)
    if not (lo < x0 < hi):
        raise UsageError("initial state already beyond the escape threshold")

    rtol = max(tol, 2.3e-14)
    sol = spi.solve_ivp(
        _make_rhs(model, r), (t0, t1), [x0], method="RK45",
        rtol=rtol, atol=0.01 * tol, dense_output=True,
        events=(hit_upper, hit_lower), t_eval=t_eval,
        max_step=np.inf if max_step is None else max_step)
    if sol.status == -1:
        raise ToleranceFailure(
            f"integrator failed between t={t0} and t={t1}: {sol.message}")

    status = TrajectoryStatus.COMPLETED
    t_escape = None
    escape_sign = 0
    if sol.status == 1:
        status = TrajectoryStatus.ESCAPED
        if len(sol.t_events[0]):
            t_escape, escape_sign = float(sol.t_events[0][0]), +1
        else:
            t_escape, escape_sign = float(sol.t_events[1][0]), -1

    ts, xs = sol.t, sol.y[0]
    if ts[0] > ts[-1]:
        ts, xs = ts[::-1], xs[::-1]
    return Trajectory(r=r, t0=t0, x0=x0, t=np.ascontiguousarray(ts),
                      x=np.ascontiguousarray(xs), status=status, tol=tol,
                      t_escape=t_escape, escape_sign=escape_sign,
                      dense=sol.sol)


@dataclass
class PullbackSolution:
    """Converged anchored estimate of x^r_− (attractor) or x^r_+ (repeller).

    ``window`` is the time span on which the estimate is trusted; when
    the trajectory escapes inside the requested window, the window is
    truncated at the escape time and the trajectory status records it.
    ``convergence_gap`` is the sup over checkpoints of the difference
    between the last two anchored runs, and ``gap_history`` the same
    quantity for every consecutive pair tried.
    """

    side: PullbackSide
    r: float
    window: tuple[float, float]
    trajectory: Trajectory
    anchor_times: list[float]
    convergence_gap: float
    gap_history: list[float]
    tol: float

    def at(self, times):
        return self.trajectory.at(times)

    @property
    def escaped(self) -> bool:
        return self.trajectory.status is TrajectoryStatus.ESCAPED


def _checkpoint_values(traj: Trajectory, cps: np.ndarray) -> np.ndarray:
    """Trajectory values at checkpoints, NaN where the run has escaped."""
    vals = np.full(cps.shape, np.nan)
    ok = (cps >= traj.t_begin - 1e-12) & (cps <= traj.t_end + 1e-12)
    if ok.any():
        vals[ok] = traj.at(np.clip(cps[ok], traj.t_begin, traj.t_end))
    return vals


def _resample(traj: Trajectory, t_lo: float, t_hi: float) -> Trajectory:
    """Restrict a trajectory to [t_lo, t_hi] on a uniform sample grid."""
    ts = np.linspace(t_lo, t_hi, PULLBACK_SAMPLES)
    xs = traj.at(ts)
    return Trajectory(r=traj.r, t0=traj.t0, x0=traj.x0, t=ts, x=xs,
                      status=traj.status, tol=traj.tol,
                      t_escape=traj.t_escape, escape_sign=traj.escape_sign,
                      dense=traj.dense)


def _estimate_pullback(model: ModelSpec, r: float, window, tol: float,
                       side: PullbackSide, branch: QuasiStaticBranch,
                       k_max: int, spacing: float | None) -> PullbackSolution:
    t_lo, t_hi = float(window[0]), float(window[1])
    if not t_lo < t_hi:
        raise UsageError("window must satisfy t_lo < t_hi")
    ds = spacing if spacing is not None else PULLBACK_SPACING_FACTOR / r
    cps = np.linspace(t_lo, t_hi, PULLBACK_CHECKPOINTS)
    solver_tol = tol / _SOLVER_SAFETY

    forward = side is PullbackSide.ATTRACTOR
    anchors: list[float] = []
    gaps: list[float] = []
    prev_vals = None
    traj = None
    for k in range(k_max + 1):
        s_k = t_lo - k * ds if forward else t_hi + k * ds
        x_k = branch.value(r * s_k)
        target = t_hi if forward else t_lo
        traj = solve_ivp(model, r, s_k, x_k, target, tol=solver_tol)
        anchors.append(s_k)
        if traj.status is TrajectoryStatus.ESCAPED:
            if forward and traj.t_escape <= t_lo:
                raise NoConvergence(
                    f"attractor estimate escapes at t={traj.t_escape:.6g} "
                    f"before the window start {t_lo}")
            if not forward and traj.t_escape >= t_hi:
                raise NoConvergence(
                    f"repeller estimate escapes at t={traj.t_escape:.6g} "
                    f"past the window end {t_hi}")
        vals = _checkpoint_values(traj, cps)
        if prev_vals is not None:
            both = ~(np.isnan(vals) | np.isnan(prev_vals))
            if not both.any():
                raise NoConvergence(
                    "no common checkpoints between successive anchored runs")
            gap = float(np.max(np.abs(vals[both] - prev_vals[both])))
            gaps.append(gap)
            if gap < tol:
                lo_eff = t_lo if forward else max(t_lo, traj.t_escape or t_lo)
                hi_eff = t_hi if not forward else min(t_hi, traj.t_escape or t_hi)
                return PullbackSolution(
                    side=side, r=r, window=(lo_eff, hi_eff),
                    trajectory=_resample(traj, lo_eff, hi_eff),
                    anchor_times=anchors, convergence_gap=gap,
                    gap_history=gaps, tol=tol)
        prev_vals = vals
    raise NoConvergence(
        f"pullback {side.value} estimate did not reach gap < {tol} "
        f"after {k_max} anchors (last gap {gaps[-1] if gaps else math.nan:.3g})")


def estimate_pullback_attractor(model: ModelSpec, r: float, window,
                                tol: float = DEFAULT_IVP_TOLERANCE, *,
                                branch: QuasiStaticBranch | None = None,
                                k_max: int = PULLBACK_MAX_ANCHORS,
                                spacing: float | None = None
                                ) -> PullbackSolution:
    """Estimate the locally pullback attracting solution x^r_− on a window.

    Runs the initial-value solver from anchors s_k = t_lo − k·Δs with
    initial data on the stable quasi-static branch, x(s_k) = X^s(r·s_k),
    and declares convergence when two successive runs agree to ``tol``
    at all checkpoints in the window.
    """
    if branch is None:
        branch = branches_for(model)[0]
    return _estimate_pullback(model, r, window, tol, PullbackSide.ATTRACTOR,
                              branch, k_max, spacing)


def estimate_pullback_repeller(model: ModelSpec, r: float, window,
                               tol: float = DEFAULT_IVP_TOLERANCE, *,
                               branch: QuasiStaticBranch | None = None,
                               k_max: int = PULLBACK_MAX_ANCHORS,
                               spacing: float | None = None
                               ) -> PullbackSolution:
    """Estimate the locally pullback repelling solution x^r_+ on a window.

    Time-reversed analogue of the attractor estimate: anchors sit at
    s_k = t_hi + k·Δs on the unstable branch and the solver runs
    backward to t_lo.
    """
    if branch is None:
        branch = branches_for(model)[1]
    return _estimate_pullback(model, r, window, tol, PullbackSide.REPELLER,
                              branch, k_max, spacing)
