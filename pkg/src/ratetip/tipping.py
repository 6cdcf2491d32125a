"""Finite-time tipping diagnostics, localization, and classification.

The detector never needs the pullback solutions themselves on infinite
horizons.  It launches four finite-time probes per (τ, r):

    y^r_−: forward  on [−τ, 0] from S_n^s(r,−τ) + ε   (outside, above)
    z^r_−: forward  on [−τ, 0] from S_n^s(r,−τ) − ε   (inside,  below)
    y^r_+: backward on [0, τ]  from S_n^u(r, τ) − ε   (outside, below)
    z^r_+: backward on [0, τ]  from S_n^u(r, τ) + ε   (inside,  above)

and compares them at t = 0:  d_out = y_−(0) − y_+(0) and
d_in = z_−(0) − z_+(0).  Below tipping both are positive; the first
sign change of d_out as r grows brackets the critical rate r*, which
bisection then localizes.  A probe that blows up in finite time still
carries sign evidence (its escape direction), so the bisection remains
meaningful past the rates where all probes stay bounded.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .asymptotics import SeriesCoefficients, compute_coefficients, partial_sum
from .equilibria import branches_for, min_branch_gap
from .errors import MathPreconditionError, NoConvergence, UsageError
from .integrate import (TrajectoryStatus, estimate_pullback_attractor,
                        estimate_pullback_repeller, solve_ivp)
from .model import ModelSpec

DEFAULT_EPSILON = 0.2
DEFAULT_TAU = 30.0
DEFAULT_R_RANGE = (0.05, 5.0)

#: Local tolerance of probe integrations.
PROBE_TOLERANCE = 1e-9

#: Points in the coarse geometric scan over r.
SCAN_POINTS = 33

#: Bisection stops when the bracket width falls below this times r.
BISECTION_REL_WIDTH = 1e-3

#: Fractions of τ probed when judging visibility at the bracket ends.
_TAU_PANEL = (0.0, 0.25, 0.5, 0.75, 1.0)

#: Slow-time half-width of oracle windows (pullback cross-checks).
_ORACLE_TAU_SPAN = 20.0
_ORACLE_TOLERANCE = 1e-8

#: Built-in ramp names for which the simulation defaults (ε=0.2, τ=30) apply.
_BUILTIN_PREFIX = "quad_"


class Classification(enum.Enum):
    END_POINT_TRACKING = "end_point_tracking"
    TIPPING = "tipping"
    VISIBLE_TIPPING = "visible_tipping"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class ProbeConfig:
    """Parameters of one discriminant evaluation."""

    n: int
    epsilon: float
    tau: float
    r: float

    def __post_init__(self):
        if self.n < 0:
            raise UsageError("series order must be nonnegative")
        if self.epsilon <= 0:
            raise UsageError("epsilon must be positive")
        if self.tau < 0:
            raise UsageError("probe horizon tau must be nonnegative")
        if self.r <= 0:
            raise UsageError("rate parameter r must be positive")


@dataclass
class ProbeOutcome:
    """Value of one probe at t = 0, or its escape verdict.

    ``value`` is ±inf when the probe blows up before reaching t = 0;
    the sign is the escape direction and is still usable as order
    evidence (scalar solutions cannot cross).
    """

    value: float
    escaped: bool = False
    t_escape: float | None = None


@dataclass
class ProbeSet:
    config: ProbeConfig
    y_minus: ProbeOutcome | None = None
    y_plus: ProbeOutcome | None = None
    z_minus: ProbeOutcome | None = None
    z_plus: ProbeOutcome | None = None


@dataclass
class DiscriminantSample:
    """d_out/d_in at one (τ, r), with escape bookkeeping."""

    config: ProbeConfig
    d_out: float
    d_in: float
    escape_times: dict = dc_field(default_factory=dict)

    @property
    def flags(self) -> list:
        return sorted(f"{name}_escaped" for name in self.escape_times)

    def record(self, stage: str) -> dict:
        return {"stage": stage, "r": self.config.r, "tau": self.config.tau,
                "d_out": self.d_out, "d_in": self.d_in,
                "flags": self.flags}


def _run_probe(model: ModelSpec, r: float, t0: float, x0: float,
               tol: float) -> ProbeOutcome:
    if t0 == 0.0:
        return ProbeOutcome(value=float(x0))
    traj = solve_ivp(model, r, t0, x0, 0.0, tol=tol)
    if traj.status is TrajectoryStatus.ESCAPED:
        return ProbeOutcome(value=math.copysign(math.inf, traj.escape_sign),
                            escaped=True, t_escape=traj.t_escape)
    return ProbeOutcome(value=traj.at(0.0))


def probe_solutions(model: ModelSpec, series_s: SeriesCoefficients,
                    series_u: SeriesCoefficients, config: ProbeConfig, *,
                    which: str = "both",
                    tol: float = PROBE_TOLERANCE) -> ProbeSet:
    """Integrate the requested probes ("out", "in", or "both") to t = 0.

    Validates ε < d_0/2 against the measured branch gap.  Escape of a
    probe is recorded, not raised.
    """
    if which not in ("out", "in", "both"):
        raise UsageError('which must be "out", "in", or "both"')
    d0 = min_branch_gap(*branches_for(model))
    if not config.epsilon < 0.5 * d0:
        raise UsageError(
            f"epsilon {config.epsilon} must lie in (0, d_0/2) = "
            f"(0, {0.5 * d0:.6g})")
    r, tau, eps = config.r, config.tau, config.epsilon
    s_minus = partial_sum(series_s, r, -tau, order=config.n)
    s_plus = partial_sum(series_u, r, tau, order=config.n)
    out = ProbeSet(config=config)
    if which in ("out", "both"):
        out.y_minus = _run_probe(model, r, -tau, s_minus + eps, tol)
        out.y_plus = _run_probe(model, r, tau, s_plus - eps, tol)
    if which in ("in", "both"):
        out.z_minus = _run_probe(model, r, -tau, s_minus - eps, tol)
        out.z_plus = _run_probe(model, r, tau, s_plus + eps, tol)
    return out


def _difference(minus: ProbeOutcome, plus: ProbeOutcome) -> float:
    if minus.escaped or plus.escaped:
        # order evidence from escape directions; −∞ below, +∞ above
        if minus.escaped and minus.value < 0:
            return -math.inf
        if plus.escaped and plus.value > 0:
            return -math.inf
        return math.inf
    return minus.value - plus.value


def _sample_from_probes(probes: ProbeSet) -> DiscriminantSample:
    esc = {}
    pairs = (("y_minus", probes.y_minus), ("y_plus", probes.y_plus),
             ("z_minus", probes.z_minus), ("z_plus", probes.z_plus))
    for name, outcome in pairs:
        if outcome is not None and outcome.escaped:
            esc[name] = outcome.t_escape
    dout = (_difference(probes.y_minus, probes.y_plus)
            if probes.y_minus is not None else math.nan)
    din = (_difference(probes.z_minus, probes.z_plus)
           if probes.z_minus is not None else math.nan)
    return DiscriminantSample(config=probes.config, d_out=dout, d_in=din,
                              escape_times=esc)


def d_out(model: ModelSpec, series_s: SeriesCoefficients,
          series_u: SeriesCoefficients, config: ProbeConfig, *,
          tol: float = PROBE_TOLERANCE) -> DiscriminantSample:
    """D_out(τ, r) = y^r_−(0,−τ) − y^r_+(0,τ) (±inf on escape verdicts)."""
    return _sample_from_probes(
        probe_solutions(model, series_s, series_u, config, which="out",
                        tol=tol))


def d_in(model: ModelSpec, series_s: SeriesCoefficients,
         series_u: SeriesCoefficients, config: ProbeConfig, *,
         tol: float = PROBE_TOLERANCE) -> DiscriminantSample:
    """D_in(τ, r) = z^r_−(0,−τ) − z^r_+(0,τ) (±inf on escape verdicts)."""
    return _sample_from_probes(
        probe_solutions(model, series_s, series_u, config, which="in",
                        tol=tol))


@dataclass
class TippingReport:
    """Outcome of detect_tipping; serializes to the documented schema."""

    model: str
    n: int
    epsilon: float
    tau: float
    bracket: tuple | None
    r_star: float | None
    uncertainty: float | None
    classification: Classification
    delta_curve: list
    indicator_curve: list
    evidence: list
    indicator_crossing_r: float | None = None

    def to_json_dict(self) -> dict:
        evidence = list(self.evidence)
        evidence.append({
            "stage": "result",
            "r_star": self.r_star,
            "uncertainty": self.uncertainty,
            "indicator_crossing_r": self.indicator_crossing_r,
        })
        return {
            "model": self.model,
            "n": self.n,
            "epsilon": self.epsilon,
            "tau": self.tau,
            "bracket": list(self.bracket) if self.bracket else None,
            "r_star": self.r_star,
            "classification": self.classification.value,
            "delta_curve": [[t, v] for t, v in self.delta_curve],
            "indicator_curve": [[r, v] for r, v in self.indicator_curve],
            "evidence": evidence,
        }


def pullback_gap(model: ModelSpec, r: float, *, t: float = 0.0,
                 tol: float = _ORACLE_TOLERANCE,
                 tau_span: float = _ORACLE_TAU_SPAN) -> float:
    """Oracle gap x^r_−(t) − x^r_+(t) from pullback estimates.

    Returns −inf when either solution has stopped existing at ``t``
    (attractor escaped earlier, or repeller escaped later backward) —
    past-tipping evidence by the same order argument the probes use.
    """
    span = max(tau_span / r, abs(t) + 1.0)
    try:
        attr = estimate_pullback_attractor(model, r, (-span, t + 1.0), tol)
        rep = estimate_pullback_repeller(model, r, (t - 1.0, span), tol)
    except NoConvergence:
        return -math.inf
    if attr.window[1] < t or rep.window[0] > t:
        return -math.inf
    return float(attr.at(t) - rep.at(t))


def min_pullback_gap(model: ModelSpec, r: float, *,
                     tol: float = _ORACLE_TOLERANCE,
                     tau_span: float = _ORACLE_TAU_SPAN,
                     checkpoints: int = 33) -> float:
    """Minimum of x^r_−(t) − x^r_+(t) over the common estimate window."""
    span = tau_span / r
    attr = estimate_pullback_attractor(model, r, (-span, span), tol)
    rep = estimate_pullback_repeller(model, r, (-span, span), tol)
    lo = max(attr.window[0], rep.window[0])
    hi = min(attr.window[1], rep.window[1])
    if not lo < hi:
        return -math.inf
    ts = np.linspace(lo, hi, checkpoints)
    return float(np.min(attr.at(ts) - rep.at(ts)))


def stability_indicator(model: ModelSpec, r: float, window=None, *,
                        pullback=None, tol: float = _ORACLE_TOLERANCE
                        ) -> float:
    """sup_t ∂ₓf(x^r_−(t), Λ(rt)) along the attractor estimate.

    Negative values certify the sufficient condition for uniform
    asymptotic stability; the indicator reaching 0 signals margin loss.
    """
    if pullback is None:
        if window is None:
            window = (-_ORACLE_TAU_SPAN / r, _ORACLE_TAU_SPAN / r)
        pullback = estimate_pullback_attractor(model, r, window, tol)
    traj = pullback.trajectory
    lam = np.asarray(model.ramp.eval(r * traj.t), dtype=float)
    if hasattr(model.field, "jet_coeffs_many"):
        dxf = model.field.jet_coeffs_many(traj.x, lam, 1)[1]
    else:  # pragma: no cover - generic fallback
        dxf = np.array([model.field.jet_eval(x, l, 1).coeffs[1]
                        for x, l in zip(traj.x, lam)])
    return float(np.max(dxf))


def indicator_crossing(model: ModelSpec, r_lo: float, r_hi: float, *,
                       rel_width: float = BISECTION_REL_WIDTH,
                       tol: float = _ORACLE_TOLERANCE) -> float:
    """Largest r with stability_indicator < 0, by bisection in [r_lo, r_hi]."""
    ind_lo = stability_indicator(model, r_lo, tol=tol)
    ind_hi = stability_indicator(model, r_hi, tol=tol)
    if ind_lo >= 0 or ind_hi < 0:
        raise MathPreconditionError(
            f"indicator does not change sign on [{r_lo}, {r_hi}] "
            f"(values {ind_lo:.3g}, {ind_hi:.3g})")
    lo, hi = r_lo, r_hi
    while hi - lo > rel_width * lo:
        mid = 0.5 * (lo + hi)
        if stability_indicator(model, mid, tol=tol) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _default_epsilon(model: ModelSpec, d0: float) -> float:
    if model.name.startswith(_BUILTIN_PREFIX):
        return DEFAULT_EPSILON
    return min(0.2 * d0, 0.2)


def _default_tau(model: ModelSpec, r_min: float) -> float:
    if model.name.startswith(_BUILTIN_PREFIX):
        return DEFAULT_TAU
    return 10.0 / r_min


def detect_tipping(model: ModelSpec, n: int = 1, epsilon: float | None = None,
                   tau: float | None = None, r_range=DEFAULT_R_RANGE, *,
                   scan_points: int = SCAN_POINTS,
                   rel_width: float = BISECTION_REL_WIDTH,
                   probe_tol: float = PROBE_TOLERANCE,
                   with_oracle: bool = True,
                   with_indicator: bool = True,
                   indicator_points: int = 9) -> TippingReport:
    """Locate and classify rate-induced tipping on an r-range.

    Scans d_out at fixed τ on a geometric r-grid, bisects the first
    sign change to relative width ``rel_width``, and classifies:
    visible_tipping needs a single scan sign change, all-positive d_out
    across the τ-panel at the left bracket end, and trailing-negative
    d_out at the right end; the pullback oracle must corroborate the
    bracket signs or the verdict degrades to undetermined.  No sign
    change anywhere means end_point_tracking.
    """
    r_min, r_max = float(r_range[0]), float(r_range[1])
    if not 0 < r_min < r_max:
        raise UsageError("r_range must satisfy 0 < r_min < r_max")
    branch_s, branch_u = branches_for(model)
    d0 = min_branch_gap(branch_s, branch_u)
    if epsilon is None:
        epsilon = _default_epsilon(model, d0)
    if not 0 < epsilon < 0.5 * d0:
        raise UsageError(
            f"epsilon {epsilon} must lie in (0, d_0/2) = (0, {0.5 * d0:.6g})")
    if tau is None:
        tau = _default_tau(model, r_min)
    series_s = compute_coefficients(branch_s, model.field, model.ramp, n)
    series_u = compute_coefficients(branch_u, model.field, model.ramp, n)

    evidence: list = []
    samples: dict = {}

    def sample(r: float, tau_probe: float, stage: str) -> DiscriminantSample:
        key = (r, tau_probe)
        if key not in samples:
            cfg = ProbeConfig(n=n, epsilon=epsilon, tau=tau_probe, r=r)
            s = _sample_from_probes(probe_solutions(
                model, series_s, series_u, cfg, tol=probe_tol))
            samples[key] = s
            evidence.append(s.record(stage))
        return samples[key]

    base = sample(r_min, tau, "scan")
    if not (base.d_out > 0 and base.d_in > 0):
        raise MathPreconditionError(
            f"r_min={r_min} is not in the tracking regime: d_out="
            f"{base.d_out:.6g}, d_in={base.d_in:.6g} (need both positive)")

    grid = np.geomspace(r_min, r_max, scan_points)
    signs = []
    for r in grid:
        s = sample(float(r), tau, "scan")
        signs.append(s.d_out > 0)
    flips = [i for i in range(len(grid) - 1) if signs[i] and not signs[i + 1]]

    def finish(classification, bracket=None, r_star=None, unc=None,
               crossing=None):
        curve = []
        if with_indicator:
            for r in np.geomspace(r_min, r_max, indicator_points):
                try:
                    curve.append((float(r), stability_indicator(model, float(r))))
                except NoConvergence:
                    break
        return TippingReport(
            model=model.name, n=n, epsilon=epsilon, tau=tau,
            bracket=bracket, r_star=r_star, uncertainty=unc,
            classification=classification, delta_curve=[],
            indicator_curve=curve, evidence=evidence,
            indicator_crossing_r=crossing)

    if not flips:
        classification = Classification.END_POINT_TRACKING
        if with_oracle:
            gap = pullback_gap(model, r_max)
            evidence.append({"stage": "oracle", "r": r_max, "gap": gap})
            if not gap > 0:
                classification = Classification.UNDETERMINED
        return finish(classification)

    for i in flips[1:]:
        evidence.append({"stage": "extra_bracket",
                         "bracket": [float(grid[i]), float(grid[i + 1])]})

    lo, hi = float(grid[flips[0]]), float(grid[flips[0] + 1])
    while hi - lo > rel_width * lo:
        mid = 0.5 * (lo + hi)
        if sample(mid, tau, "bisection").d_out > 0:
            lo = mid
        else:
            hi = mid
    r_star = 0.5 * (lo + hi)
    uncertainty = 0.5 * (hi - lo)

    left_ok = all(sample(lo, f * tau, "panel").d_out > 0 for f in _TAU_PANEL)
    right = [sample(hi, f * tau, "panel").d_out < 0 for f in _TAU_PANEL]
    # d_out must be negative from some panel τ onward (τ_out exists)
    right_ok = right[-1] and any(right)

    classification = Classification.TIPPING
    if left_ok and right_ok and len(flips) == 1:
        classification = Classification.VISIBLE_TIPPING

    if with_oracle:
        gap_lo = pullback_gap(model, lo)
        gap_hi = pullback_gap(model, hi)
        evidence.append({"stage": "oracle", "r": lo, "gap": gap_lo})
        evidence.append({"stage": "oracle", "r": hi, "gap": gap_hi})
        if not (gap_lo > 0 and gap_hi < 0):
            evidence.append({"stage": "oracle_conflict",
                             "bracket": [lo, hi]})
            classification = Classification.UNDETERMINED

    crossing = None
    if with_indicator:
        try:
            crossing = indicator_crossing(model, r_min, hi)
        except (MathPreconditionError, NoConvergence):
            crossing = None
    return finish(classification, bracket=(lo, hi), r_star=r_star,
                  unc=uncertainty, crossing=crossing)


@dataclass
class DeltaSample:
    tau: float
    delta: float
    r_edge: float | None


def delta_curve(model: ModelSpec, n: int, epsilon: float, r_star: float,
                tau_grid=None, *, series_s: SeriesCoefficients | None = None,
                series_u: SeriesCoefficients | None = None,
                probe_tol: float = PROBE_TOLERANCE,
                rel_width: float = BISECTION_REL_WIDTH,
                r_floor_factor: float = 0.05,
                scan_factor: float = 0.93,
                persistence_samples: int = 6) -> list:
    """δ(n,τ) = r* − inf{r ≤ r*: d_in(τ,ρ) < 0 for all ρ in [r, r*]}.

    For each τ in the grid (default 13 points on [0, 30]): walk down
    from r*, bisect the lowest persistent sign edge of d_in, and verify
    persistence on samples above it.  τ values where d_in(τ, r*) ≥ 0
    report δ = 0 (the horizon is below the theorem's τ_in).
    """
    if tau_grid is None:
        tau_grid = np.linspace(0.0, 30.0, 13)
    if series_s is None or series_u is None:
        branch_s, branch_u = branches_for(model)
        series_s = compute_coefficients(branch_s, model.field, model.ramp, n)
        series_u = compute_coefficients(branch_u, model.field, model.ramp, n)

    def din(tau: float, r: float) -> float:
        cfg = ProbeConfig(n=n, epsilon=epsilon, tau=tau, r=r)
        return d_in(model, series_s, series_u, cfg, tol=probe_tol).d_in

    r_floor = r_floor_factor * r_star
    out = []
    for tau in np.asarray(tau_grid, dtype=float):
        if not din(tau, r_star) < 0:
            out.append(DeltaSample(tau=float(tau), delta=0.0, r_edge=None))
            continue
        # walk down until d_in turns nonnegative (or hit the floor)
        hi = r_star
        lo = None
        r = r_star
        while r > r_floor:
            r *= scan_factor
            if not din(tau, r) < 0:
                lo = r
                break
            hi = r
        if lo is None:
            out.append(DeltaSample(tau=float(tau), delta=r_star - r_floor,
                                   r_edge=r_floor))
            continue
        for _ in range(8):
            # bisect the edge, then confirm negativity persists up to r*
            while hi - lo > rel_width * lo:
                mid = 0.5 * (lo + hi)
                if din(tau, mid) < 0:
                    hi = mid
                else:
                    lo = mid
            probes = np.geomspace(hi, r_star, persistence_samples + 2)[1:-1]
            bad = [rho for rho in probes if not din(tau, float(rho)) < 0]
            if not bad:
                break
            lo, hi = float(max(bad)), r_star
        edge = 0.5 * (lo + hi)
        out.append(DeltaSample(tau=float(tau), delta=r_star - edge,
                               r_edge=edge))
    return out


def fig5_pairs(samples: list, r_star: float) -> list:
    """(τ, r* − δ(n,τ)) pairs, the plotted quantity of the δ-figure."""
    return [(s.tau, r_star - s.delta) for s in samples]


@dataclass
class TrackingVerdict:
    certified: bool
    reason: str
    margin: float | None = None
    flag: str = "empirical-constant"


def end_point_tracking_check(model: ModelSpec, series_s, series_u,
                             r: float, epsilon: float, T: float = 0.0, *,
                             upper_unstable: float | None = None
                             ) -> TrackingVerdict:
    """Sufficient finite-data check that x^r_− end-point tracks X^s.

    Requires, for all grid times t > T, X^u_+ + ε < S_n^s(r,t) − Ĉ_n
    r^{n+1} (and, when an unstable equilibrium Y^u_+ sits above X^s_+,
    S_n^s(r,t) + Ĉ_n r^{n+1} < Y^u_+ − ε).  Ĉ_n is the fitted error
    constant, hence the "empirical-constant" flag: this is strong
    evidence, not a proof.  Inconclusive when r reaches the measured
    validity radius or when the attractor estimate itself escapes.
    """
    if epsilon <= 0:
        raise UsageError("epsilon must be positive")
    approx = series_s  # SeriesApproximation of the stable branch
    coeffs = approx.coefficients
    if r >= approx.validity_radius:
        return TrackingVerdict(
            certified=False,
            reason=f"r={r:.6g} is not below the measured validity radius "
                   f"{approx.validity_radius:.6g}")
    _, branch_u = branches_for(model)
    xu_plus = branch_u.endpoint_plus

    # premise guard: the bound presumes a globally defined attractor
    t_hi = max(T, _ORACLE_TAU_SPAN / r) + 10.0 / r
    guard = solve_ivp(model, r, -_ORACLE_TAU_SPAN / r,
                      coeffs.coefficient(0, -_ORACLE_TAU_SPAN), t_hi,
                      tol=1e-8)
    if guard.status is TrajectoryStatus.ESCAPED:
        return TrackingVerdict(
            certified=False,
            reason=f"attractor estimate escapes at t={guard.t_escape:.6g}; "
                   "the series bound's premise fails")

    tau_grid = coeffs.grid[coeffs.grid > r * T]
    s_vals = partial_sum(coeffs, r, tau_grid / r)
    err = approx.error_constant * r ** (coeffs.order + 1)
    margin = float(np.min(s_vals - err) - (xu_plus + epsilon))
    if upper_unstable is not None:
        margin_up = float(upper_unstable - epsilon - np.max(s_vals + err))
        margin = min(margin, margin_up)
    if margin > 0:
        return TrackingVerdict(certified=True, reason="inequalities hold at "
                               "all grid times past T", margin=margin)
    return TrackingVerdict(
        certified=False, margin=margin,
        reason="separation inequality fails on the checked grid")


@dataclass
class ProximityVerdict:
    found: bool
    t_eps: float | None
    caveat: str = ("threshold time is not computable from finite data; "
                   "this finding is diagnostic, not a proof")


def late_proximity_check(model: ModelSpec, r: float, epsilon: float,
                         T: float, *, pullback=None,
                         tol: float = _ORACLE_TOLERANCE) -> ProximityVerdict:
    """Report the first t > T with |x^r_−(t) − X^s_+| < ε, if any."""
    if epsilon <= 0:
        raise UsageError("epsilon must be positive")
    branch_s, _ = branches_for(model)
    xs_plus = branch_s.endpoint_plus
    if pullback is None:
        window = (-_ORACLE_TAU_SPAN / r,
                  max(T + 20.0, _ORACLE_TAU_SPAN / r + 10.0))
        try:
            pullback = estimate_pullback_attractor(model, r, window, tol)
        except NoConvergence:
            return ProximityVerdict(found=False, t_eps=None)
    traj = pullback.trajectory
    mask = (traj.t > T) & (np.abs(traj.x - xs_plus) < epsilon)
    if mask.any():
        return ProximityVerdict(found=True, t_eps=float(traj.t[mask][0]))
    return ProximityVerdict(found=False, t_eps=None)


def probe_trajectories(model: ModelSpec, series_s: SeriesCoefficients,
                       series_u: SeriesCoefficients, config: ProbeConfig,
                       t_window, *, which: str = "both",
                       tol: float = PROBE_TOLERANCE) -> dict:
    """Full probe trajectories for visualization, escape-truncated.

    Minus-probes run forward from t = −τ to the window end; plus-probes
    run backward from t = +τ to the window start.  Unlike the
    discriminant path, integration continues past t = 0.
    """
    t_lo, t_hi = float(t_window[0]), float(t_window[1])
    r, tau, eps = config.r, config.tau, config.epsilon
    if not (t_lo <= -tau and tau <= t_hi):
        raise UsageError("window must contain the probe anchors [-tau, tau]")
    s_minus = partial_sum(series_s, r, -tau, order=config.n)
    s_plus = partial_sum(series_u, r, tau, order=config.n)
    out = {}
    if which in ("out", "both"):
        out["y_minus"] = solve_ivp(model, r, -tau, s_minus + eps, t_hi, tol=tol)
        out["y_plus"] = solve_ivp(model, r, tau, s_plus - eps, t_lo, tol=tol)
    if which in ("in", "both"):
        out["z_minus"] = solve_ivp(model, r, -tau, s_minus - eps, t_hi, tol=tol)
        out["z_plus"] = solve_ivp(model, r, tau, s_plus + eps, t_lo, tol=tol)
    return out


def discriminant_csv_rows(samples: list) -> list:
    """Rows (r, tau, d_out, d_in, flags) for delimited export."""
    rows = []
    for s in samples:
        rows.append((s.config.r, s.config.tau, s.d_out, s.d_in,
                     ";".join(s.flags)))
    return rows
