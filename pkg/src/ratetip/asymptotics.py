"""Asymptotic-series approximation of the pullback solutions.

Given a quasi-static branch X(τ), builds the slow-time coefficients a_i
of the formal series Σ a_i(τ) r^i solving r·(d/dτ)Σ = f(Σ, Λ(τ)) order
by order:

    a_0 = X,    a_1 = Ẋ / ∂ₓf,
    a_i = [∂ₓf]⁻¹ ( ȧ_{i−1} − Σ_{j=2..i} (∂ʲₓf / j!) Σ_{k₁+…+k_j=i, k_l≥1}
                     a_{k₁}···a_{k_j} ),                       i ≥ 2,

with every derivative of f evaluated on the branch (X(τ), Λ(τ)).  The
partial sums S_n(r, t) = Σ_{i≤n} a_i(rt) r^i approximate the pullback
attracting solution (stable branch) or repelling solution (unstable
branch) to O(r^{n+1}) for r below a validity radius r̄_n; the module
measures that radius, the error constant, and the half-line boundaries
on which a requested accuracy ε holds.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .equilibria import (HYPERBOLICITY_TOLERANCE, QuasiStaticBranch,
                         Stability, branch_derivative, branches_for)
from .errors import MarginLoss, NoConvergence, OrderTooHigh, UsageError
from .integrate import (estimate_pullback_attractor,
                        estimate_pullback_repeller)
from .model import ModelSpec, PolynomialField, RampFunction, ScalarField

#: Spline-differentiated recursions compound noise; stop here.
MAX_SERIES_ORDER = 5

#: Default probe ceiling when measuring the validity radius.
DEFAULT_R_PROBE_MAX = 10.0

#: Slow-time half-width of the window used for error fits and boundaries.
FIT_TAU_SPAN = 15.0
BOUNDARY_TAU_SPAN = 20.0

#: Default tolerance of the pullback oracle behind the error fit.
ORACLE_TOLERANCE = 1e-10

_DEFAULT_FIT_SAMPLES = (1e-3, 1e-1, 10)


@dataclass
class SeriesCoefficients:
    """Slow-time coefficients a_0 … a_n of one branch's series.

    ``coeff_values[i][k] = a_i(τ_k)`` on the shared grid; ``sup_norms[i]``
    is M_i = max_k |a_i(τ_k)|.  Off-grid evaluation is exact for a_0
    (Newton-polished root of the frozen system) and a_1 (implicit-
    function formula), so between-node interpolation error enters the
    partial sums only at O(r²); higher coefficients use their splines.
    """

    kind: Stability
    order: int
    grid: np.ndarray
    coeff_values: list
    coeff_splines: list
    sup_norms: list
    field: ScalarField
    ramp: RampFunction

    def _branch_points(self, tau: np.ndarray):
        """Exact (X(τ), Λ(τ), ∂ₓf) triples, polished off the a_0 spline."""
        lam = np.asarray(self.ramp.eval(tau), dtype=float)
        x = self.coeff_splines[0](np.clip(tau, self.grid[0], self.grid[-1]))
        rows = None
        for _ in range(3):
            rows = _jet_rows(self.field, x, lam, 1)
            x = x - rows[0] / rows[1]
        return x, lam, _jet_rows(self.field, x, lam, 1)[1]

    def coefficient(self, i: int, tau):
        """Evaluate a_i(τ); beyond the grid a_0 freezes, a_i≥2 vanish."""
        if not 0 <= i <= self.order:
            raise UsageError(f"coefficient index {i} outside 0..{self.order}")
        scalar = np.ndim(tau) == 0
        ts = np.atleast_1d(np.asarray(tau, dtype=float))
        if i == 0:
            out, _, _ = self._branch_points(ts)
        elif i == 1:
            x, lam, dxf = self._branch_points(ts)
            xdot = -self.field.param_deriv(x, lam) \
                * np.asarray(self.ramp.deriv(ts), dtype=float) / dxf
            out = xdot / dxf
        else:
            lo, hi = self.grid[0], self.grid[-1]
            out = self.coeff_splines[i](np.clip(ts, lo, hi))
            out = np.where((ts < lo) | (ts > hi), 0.0, out)
        return float(out[0]) if scalar else out


def _compositions(total: int, parts: int):
    """All tuples (k₁,…,k_parts) of positive integers summing to total."""
    for cuts in itertools.combinations(range(1, total), parts - 1):
        bounds = (0,) + cuts + (total,)
        yield tuple(bounds[m + 1] - bounds[m] for m in range(parts))


def _jet_rows(field: ScalarField, x: np.ndarray, lam: np.ndarray,
              n: int) -> np.ndarray:
    """Taylor rows c_j(τ_k) = ∂ʲₓf/j! at (x_k, λ_k), shape (n+1, len(x))."""
    if isinstance(field, PolynomialField):
        return field.jet_coeffs_many(x, lam, n)
    rows = np.empty((n + 1, x.size))
    for k in range(x.size):  # pragma: no cover - generic fallback
        rows[:, k] = field.jet_eval(float(x[k]), float(lam[k]), n).coeffs
    return rows


def compute_coefficients(branch: QuasiStaticBranch, field: ScalarField,
                         ramp: RampFunction, n: int) -> SeriesCoefficients:
    """Build a_0 … a_n on the branch grid by the order-by-order recursion.

    a_0 is the branch itself; a_1 = Ẋ/∂ₓf uses the analytic branch
    derivative; higher coefficients differentiate their predecessor by
    spline and subtract the exact composition sums of lower orders.
    Raises MarginLoss if |∂ₓf| drops below the hyperbolicity tolerance
    anywhere on the grid, and OrderTooHigh past MAX_SERIES_ORDER.
    """
    if n < 0:
        raise UsageError("series order must be nonnegative")
    if n > MAX_SERIES_ORDER:
        raise OrderTooHigh(
            f"series order {n} exceeds the supported maximum "
            f"{MAX_SERIES_ORDER} (spline-derivative noise compounds)")
    grid = branch.grid
    jets = _jet_rows(field, branch.values, branch.lambda_values, max(n, 1))
    dxf = jets[1]
    if np.min(np.abs(dxf)) < HYPERBOLICITY_TOLERANCE:
        raise MarginLoss(
            "hyperbolicity margin lost on the grid; series recursion "
            "divides by ∂ₓf")

    values = [np.array(branch.values, dtype=float)]
    splines = [CubicSpline(grid, values[0])]
    if n >= 1:
        xdot = branch_derivative(branch, field, ramp, grid)
        values.append(xdot / dxf)
        splines.append(CubicSpline(grid, values[1]))
    for i in range(2, n + 1):
        adot = splines[i - 1].derivative()(grid)
        comp = np.zeros_like(adot)
        for j in range(2, i + 1):
            block = np.zeros_like(adot)
            for ks in _compositions(i, j):
                prod = values[ks[0]].copy()
                for k in ks[1:]:
                    prod = prod * values[k]
                block += prod
            comp += jets[j] * block
        values.append((adot - comp) / dxf)
        splines.append(CubicSpline(grid, values[i]))

    sups = [float(np.max(np.abs(v))) for v in values]
    return SeriesCoefficients(kind=branch.kind, order=n, grid=grid,
                              coeff_values=values, coeff_splines=splines,
                              sup_norms=sups, field=field, ramp=ramp)


def partial_sum(series: SeriesCoefficients, r: float, t, *,
                order: int | None = None):
    """S_n(r, t) = Σ_{i=0}^n a_i(rt) r^i (optionally truncated below n).

    Beyond the coefficient grid the sum freezes at the branch endpoint
    (a_0 tends to the frozen equilibrium, higher coefficients vanish).
    """
    if r <= 0:
        raise UsageError("rate parameter r must be positive")
    n = series.order if order is None else order
    if not 0 <= n <= series.order:
        raise UsageError(f"truncation order {n} outside 0..{series.order}")
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    tau = r * ts
    out = series.coefficient(0, tau)
    for i in range(1, n + 1):
        out = out + series.coefficient(i, tau) * r**i
    return float(out[0]) if scalar else out


def validity_radius(series: SeriesCoefficients, field: ScalarField,
                    ramp: RampFunction, r_probe_max: float = DEFAULT_R_PROBE_MAX
                    ) -> float:
    """Largest r ≤ r_probe_max keeping sign ∂ₓf(S_n(r,·), Λ) on the grid.

    The sign must match the branch (negative for stable, positive for
    unstable) at every grid time.  Located by bisection to relative
    tolerance 1e−3; returns r_probe_max when the sign never flips, and
    0.0 when it is already wrong as r → 0 (corrupted inputs).
    """
    if r_probe_max <= 0:
        raise UsageError("r_probe_max must be positive")
    lam = np.asarray(ramp.eval(series.grid), dtype=float)
    sign = -1.0 if series.kind is Stability.STABLE else +1.0

    def sign_ok(r: float) -> bool:
        s = np.zeros_like(lam)
        for i in range(series.order, -1, -1):
            s = s * r + series.coeff_values[i]
        dxf = _jet_rows(field, s, lam, 1)[1]
        return bool(np.all(sign * dxf > 0.0))

    if sign_ok(r_probe_max):
        return r_probe_max
    lo = 1e-9 * r_probe_max
    if not sign_ok(lo):
        return 0.0
    hi = r_probe_max
    while hi - lo > 1e-3 * lo:
        mid = 0.5 * (lo + hi)
        if sign_ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class ErrorConstantFit:
    """Empirical error-constant fit log E = log Ĉ + q·log r.

    ``c_hat`` is max_r E(r)/r^{n+1} (a usable stand-in for the bound's
    constant), ``slope`` the fitted q, ``residual`` the max absolute
    deviation of log E from the fit line.
    """

    c_hat: float
    slope: float
    intercept: float
    residual: float
    r_samples: np.ndarray
    errors: np.ndarray


def estimate_error_constant(series: SeriesCoefficients, model: ModelSpec,
                            r_samples=None, *, tol: float = ORACLE_TOLERANCE,
                            tau_span: float = FIT_TAU_SPAN,
                            time_samples: int = 201,
                            validity: float | None = None,
                            cache: dict | None = None) -> ErrorConstantFit:
    """Fit E(r) = max_t |S_n(r,t) − x^r_±(t)| against the pullback oracle.

    E is measured on the window |rt| ≤ tau_span with anchored pullback
    estimates at tolerance ``tol``; when ``validity`` (a measured r̄_n)
    is given, samples above half of it are dropped.  ``cache`` maps
    (side, r, tol, tau_span) to PullbackSolution so sweeps over several
    orders reuse the expensive estimates.
    """
    if r_samples is None:
        r_samples = np.geomspace(*_DEFAULT_FIT_SAMPLES)
    r_samples = np.asarray(sorted(float(r) for r in r_samples))
    if validity is not None:
        r_samples = r_samples[r_samples <= 0.5 * validity]
    if r_samples.size < 3:
        raise UsageError("need at least 3 rate samples below the validity "
                         "cutoff for a meaningful error fit")

    stable = series.kind is Stability.STABLE
    estimator = (estimate_pullback_attractor if stable
                 else estimate_pullback_repeller)
    errors = np.empty(r_samples.size)
    for idx, r in enumerate(r_samples):
        key = (series.kind.value, float(r), tol, tau_span)
        pb = cache.get(key) if cache is not None else None
        if pb is None:
            pb = estimator(model, r, (-tau_span / r, tau_span / r), tol)
            if cache is not None:
                cache[key] = pb
        ts = np.linspace(pb.window[0], pb.window[1], time_samples)
        errors[idx] = float(np.max(np.abs(
            partial_sum(series, r, ts) - pb.at(ts))))

    # frozen systems reach error 0 exactly; floor it so the fit stays finite
    logs = np.log(np.maximum(errors, np.finfo(float).tiny))
    slope, intercept = np.polyfit(np.log(r_samples), logs, 1)
    residual = float(np.max(np.abs(
        logs - (intercept + slope * np.log(r_samples)))))
    c_hat = float(np.max(errors / r_samples ** (series.order + 1)))
    return ErrorConstantFit(c_hat=c_hat, slope=float(slope),
                            intercept=float(intercept), residual=residual,
                            r_samples=r_samples, errors=errors)


@dataclass
class SeriesApproximation:
    """A coefficient set bundled with its measured quality numbers."""

    coefficients: SeriesCoefficients
    validity_radius: float
    error_constant: float
    fit: ErrorConstantFit

    @property
    def kind(self) -> Stability:
        return self.coefficients.kind

    @property
    def order(self) -> int:
        return self.coefficients.order

    def __call__(self, r: float, t, *, order: int | None = None):
        return partial_sum(self.coefficients, r, t, order=order)


def build_series_approximation(model: ModelSpec, kind: Stability | str,
                               n: int, *, branch: QuasiStaticBranch | None = None,
                               r_probe_max: float = DEFAULT_R_PROBE_MAX,
                               r_samples=None, tol: float = ORACLE_TOLERANCE,
                               cache: dict | None = None) -> SeriesApproximation:
    """Coefficients + measured validity radius + error-constant fit."""
    kind = Stability(kind) if isinstance(kind, str) else kind
    if branch is None:
        stable_b, unstable_b = branches_for(model)
        branch = stable_b if kind is Stability.STABLE else unstable_b
    coeffs = compute_coefficients(branch, model.field, model.ramp, n)
    radius = validity_radius(coeffs, model.field, model.ramp, r_probe_max)
    fit = estimate_error_constant(coeffs, model, r_samples, tol=tol,
                                  validity=radius, cache=cache)
    return SeriesApproximation(coefficients=coeffs, validity_radius=radius,
                               error_constant=fit.c_hat, fit=fit)


def validity_boundary(approx: SeriesApproximation, model: ModelSpec,
                      r: float, epsilon: float, *,
                      order: int | None = None, pullback=None,
                      tau_span: float = BOUNDARY_TAU_SPAN,
                      time_samples: int = 2001,
                      tol: float = 1e-8) -> float:
    """Half-line boundary on which |S_n(r,·) − x^r_±| stays below ε.

    Stable side: returns the largest sampled β with the bound holding
    for all t ≤ β, and +∞ when it holds on the whole window while
    r < min(r̄_n, (ε/Ĉ_n)^{1/(n+1)}).  Unstable side mirrors in time
    (largest half-line [α, ∞), −∞ in the certified case).
    """
    if epsilon <= 0:
        raise UsageError("epsilon must be positive")
    series = approx.coefficients
    stable = series.kind is Stability.STABLE
    if pullback is None:
        window = (-tau_span / r, tau_span / r)
        try:
            pullback = (estimate_pullback_attractor(model, r, window, tol)
                        if stable else
                        estimate_pullback_repeller(model, r, window, tol))
        except NoConvergence:
            return -math.inf if stable else math.inf
    ts = np.linspace(pullback.window[0], pullback.window[1], time_samples)
    diff = np.abs(partial_sum(series, r, ts, order=order) - pullback.at(ts))
    holds = diff < epsilon
    n_eff = series.order if order is None else order
    certified_r = min(approx.validity_radius,
                      (epsilon / approx.error_constant) ** (1.0 / (n_eff + 1))
                      if approx.error_constant > 0 else math.inf)
    if bool(np.all(holds)) and not pullback.escaped:
        if r < certified_r:
            return math.inf if stable else -math.inf
        return float(ts[-1]) if stable else float(ts[0])
    if stable:
        bad = int(np.argmin(holds))  # first failure index
        return float(ts[bad - 1]) if bad > 0 else -math.inf
    bad = len(ts) - 1 - int(np.argmin(holds[::-1]))  # last failure index
    return float(ts[bad + 1]) if bad < len(ts) - 1 else math.inf


def series_defect(series: SeriesCoefficients, field: ScalarField,
                  ramp: RampFunction, r: float) -> float:
    """Max grid defect |r·dS/dτ − f(S, Λ)| of the truncated series.

    Scales as O(r^{n+1}): the construction cancels the slow equation
    through order r^n exactly.
    """
    tau = series.grid
    lam = np.asarray(ramp.eval(tau), dtype=float)
    s = np.zeros_like(lam)
    ds = np.zeros_like(lam)
    for i in range(series.order, -1, -1):
        s = s * r + series.coeff_values[i]
        ds = ds * r + series.coeff_splines[i].derivative()(tau)
    return float(np.max(np.abs(r * ds - field.eval(s, lam))))


def series_csv_rows(series: SeriesCoefficients):
    """Rows (tau, a_0, …, a_n) for delimited export."""
    cols = [series.grid] + [np.asarray(v) for v in series.coeff_values]
    return list(zip(*[c.tolist() for c in cols]))


def series_summary(approx: SeriesApproximation) -> dict:
    """Plain-dict summary (JSON-ready) of the measured series quality."""
    return {
        "kind": approx.kind.value,
        "order": approx.order,
        "sup_norms": [float(m) for m in approx.coefficients.sup_norms],
        "validity_radius": float(approx.validity_radius),
        "error_constant": float(approx.error_constant),
        "fit_slope": float(approx.fit.slope),
        "fit_residual": float(approx.fit.residual),
    }
