"""Frozen-system equilibria and quasi-static branch continuation.

For each λ the frozen system ẋ = f(x, λ) has hyperbolic equilibria; sweeping
λ = Λ(τ) turns them into quasi-static branches X(τ). The stable branch must
keep ∂ₓf < −p < 0 (hyperbolicity margin p) and distinct branches must keep a
uniform gap d₀ — both quantities are measured here, not assumed.
"""

from __future__ import annotations

import enum
import weakref
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import (BranchFold, GapCollapse, NoRoots, NonHyperbolicRoot)
from .model import PolynomialField, RampFunction, ScalarField

ROOT_TOLERANCE = 1e-10
HYPERBOLICITY_TOLERANCE = 1e-6
GAP_TOLERANCE = 1e-6

#: bracketing-scan resolution for non-polynomial fields
SCAN_CELLS = 2048

#: half-width of the uniformly resolved τ core (clipped to τ_tail)
CORE_HALF_WIDTH = 40.0
CORE_POINTS = 4001
TAIL_RATIO = 1.05


class Stability(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class Equilibrium:
    x: float
    lam: float
    stability: Stability
    derivative: float  # ∂ₓf(x, λ)


class QuasiStaticBranch:
    """A continued curve τ ↦ X(τ) of hyperbolic frozen equilibria.

    ``margin`` is min|∂ₓf| along the branch (the empirical hyperbolicity
    margin p). Evaluation outside the grid clamps to the endpoint values,
    matching the asymptotically frozen tails of the ramp.
    """

    def __init__(self, kind: Stability, grid: np.ndarray, values: np.ndarray,
                 lambda_values: np.ndarray, dxf_values: np.ndarray,
                 endpoint_minus: float, endpoint_plus: float):
        self.kind = kind
        self.grid = grid
        self.values = values
        self.lambda_values = lambda_values
        self.dxf_values = dxf_values
        self.margin = float(np.min(np.abs(dxf_values)))
        self.endpoint_minus = endpoint_minus
        self.endpoint_plus = endpoint_plus
        self._spline = CubicSpline(grid, values)
        self._spline_deriv = self._spline.derivative()

    def value(self, tau):
        tau = np.clip(tau, self.grid[0], self.grid[-1])
        out = self._spline(tau)
        return float(out) if np.ndim(out) == 0 else out

    def spline_derivative(self, tau):
        tau = np.clip(tau, self.grid[0], self.grid[-1])
        out = self._spline_deriv(tau)
        return float(out) if np.ndim(out) == 0 else out

    def __repr__(self):
        return (f"QuasiStaticBranch({self.kind.value}, margin={self.margin:.6g}, "
                f"tau in [{self.grid[0]:.6g}, {self.grid[-1]:.6g}])")


def default_tau_grid(ramp: RampFunction,
                     core_half_width: float = CORE_HALF_WIDTH,
                     core_points: int = CORE_POINTS,
                     tail_ratio: float = TAIL_RATIO) -> np.ndarray:
    """Hybrid τ-grid: uniform core plus geometric tails out to ±τ_tail.

    The core resolves the ramp's transition region; the tails (5% relative
    spacing) reach the declared frozen horizon, which for slowly decaying
    ramps like arctan sits many decades beyond the core.
    """
    tt = ramp.tau_tail
    w = core_half_width if tt == 0.0 else min(core_half_width, tt)
    core = np.linspace(-w, w, core_points)
    if tt <= w:
        return core
    tail = [w]
    while tail[-1] < tt:
        tail.append(min(tail[-1] * tail_ratio, tt))
    tail = np.asarray(tail[1:])
    return np.concatenate([-tail[::-1], core, tail])


def _dxf(field: ScalarField, x, lam):
    """∂ₓf, vectorized where the field supports it."""
    if np.ndim(x) == 0:
        return field.jet_eval(float(x), float(lam), 1).coeffs[1]
    if isinstance(field, PolynomialField):
        return field.jet_coeffs_many(x, lam, 1)[1]
    return np.array([field.jet_eval(float(xi), float(li), 1).coeffs[1]
                     for xi, li in zip(x, np.broadcast_to(lam, np.shape(x)))])


def _classify(field: ScalarField, x: float, lam: float) -> Equilibrium:
    d = float(_dxf(field, x, lam))
    if abs(d) < HYPERBOLICITY_TOLERANCE:
        raise NonHyperbolicRoot(
            f"root x={x:.12g} at lambda={lam:.6g} has |dxf|={abs(d):.3g} "
            f"< {HYPERBOLICITY_TOLERANCE}")
    kind = Stability.STABLE if d < 0 else Stability.UNSTABLE
    return Equilibrium(x=x, lam=lam, stability=kind, derivative=d)


def _newton_polish(field: ScalarField, lam: float, x: float,
                   max_iter: int = 50) -> float:
    for _ in range(max_iter):
        fx = field.eval(x, lam)
        if abs(fx) < 1e-14 * max(1.0, abs(x)):
            break
        d = _dxf(field, x, lam)
        if d == 0.0:
            break
        x = x - fx / d
    return x


def _poly_roots(field: PolynomialField, lam: float) -> list[float]:
    p = field.x_poly_coeffs(lam)  # ascending
    p = np.trim_zeros(p, "b")
    if p.size <= 1:
        return []
    roots = np.roots(p[::-1])
    real = [float(z.real) for z in roots
            if abs(z.imag) <= 1e-9 * max(1.0, abs(z))]
    real.sort()
    merged: list[float] = []
    for x in real:
        if merged and abs(x - merged[-1]) <= 1e-8 * max(1.0, abs(x)):
            continue
        merged.append(x)
    return merged


def _scan_roots(field: ScalarField, lam: float) -> list[float]:
    # uniform bracketing scan; adequate for fields with O(1) root spacing
    x_min, x_max, _, _ = field.bound_box
    xs = np.linspace(x_min, x_max, SCAN_CELLS + 1)
    fs = np.array([field.eval(float(x), lam) for x in xs])
    roots = []
    for k in range(SCAN_CELLS):
        a, b = fs[k], fs[k + 1]
        if a == 0.0:
            roots.append(float(xs[k]))
        elif a * b < 0:
            roots.append(float(brentq(lambda x: field.eval(x, lam),
                                      xs[k], xs[k + 1], xtol=1e-13)))
    return roots


def find_equilibria(field: ScalarField, lam: float) -> list[Equilibrium]:
    """All hyperbolic roots of f(·, λ) inside the trusted box, ascending in x.

    Polynomial fields use companion-matrix roots plus Newton polish; other
    fields fall back to a bracketing scan. Raises NoRoots when the frozen
    system has no equilibria and NonHyperbolicRoot at a margin violation.
    """
    if isinstance(field, PolynomialField):
        candidates = _poly_roots(field, lam)
    else:
        candidates = _scan_roots(field, lam)
    x_min, x_max, _, _ = field.bound_box
    out = []
    for x in candidates:
        x = _newton_polish(field, lam, x)
        if not (x_min <= x <= x_max):
            continue
        if abs(field.eval(x, lam)) >= ROOT_TOLERANCE:
            continue
        out.append(_classify(field, x, lam))
    if not out:
        raise NoRoots(f"frozen system has no equilibria at lambda={lam:.6g}")
    out.sort(key=lambda e: e.x)
    return out


def trace_branch(field: ScalarField, ramp: RampFunction, seed: Equilibrium,
                 tau_grid: np.ndarray | None = None) -> QuasiStaticBranch:
    """Continue a hyperbolic equilibrium across the ramp.

    Tangent predictor from the implicit-function derivative, Newton
    corrector at every node. Raises BranchFold when hyperbolicity is lost
    (a fold of frozen equilibria) and verifies the stability kind never
    flips along the branch.
    """
    if tau_grid is None:
        tau_grid = default_tau_grid(ramp)
    tau_grid = np.asarray(tau_grid, dtype=float)
    lam_values = np.atleast_1d(ramp.eval(tau_grid))

    values = np.empty_like(tau_grid)
    dxf_values = np.empty_like(tau_grid)
    want_stable = seed.stability is Stability.STABLE

    x = _newton_polish(field, float(lam_values[0]), seed.x)
    for k, lam in enumerate(lam_values):
        lam = float(lam)
        x = _newton_polish(field, lam, x)
        fx = field.eval(x, lam)
        d = float(_dxf(field, x, lam))
        if abs(d) < HYPERBOLICITY_TOLERANCE or abs(fx) >= ROOT_TOLERANCE:
            raise BranchFold(
                f"continuation lost hyperbolicity near tau={tau_grid[k]:.6g} "
                f"(lambda={lam:.6g}, |dxf|={abs(d):.3g})")
        if (d < 0) != want_stable:
            raise BranchFold(
                f"stability flipped along the branch at tau={tau_grid[k]:.6g}")
        values[k] = x
        dxf_values[k] = d
        if k + 1 < len(lam_values):
            # tangent predictor: dX/dλ = −∂_λf / ∂ₓf
            dlam = float(lam_values[k + 1]) - lam
            x = x + (-field.param_deriv(x, lam) / d) * dlam

    endpoint_minus = _newton_polish(field, ramp.lambda_minus, float(values[0]))
    endpoint_plus = _newton_polish(field, ramp.lambda_plus, float(values[-1]))
    return QuasiStaticBranch(
        kind=seed.stability, grid=tau_grid, values=values,
        lambda_values=np.asarray(lam_values, dtype=float),
        dxf_values=dxf_values,
        endpoint_minus=float(endpoint_minus), endpoint_plus=float(endpoint_plus))


def branch_derivative(branch: QuasiStaticBranch, field: ScalarField,
                      ramp: RampFunction, tau):
    """Ẋ(τ) by implicit differentiation of 0 = f(X(τ), Λ(τ)).

    Ẋ = −∂_λf(X, Λ)·Λ'(τ) / ∂ₓf(X, Λ); exact up to the root-polish
    tolerance, unlike the spline derivative it is cross-checked against.
    """
    x = branch.value(tau)
    lam = ramp.eval(tau)
    dlam = ramp.deriv(tau)
    return -field.param_deriv(x, lam) * dlam / _dxf(field, x, lam)


def min_branch_gap(branch_a: QuasiStaticBranch, branch_b: QuasiStaticBranch) -> float:
    """Empirical d₀ = min over the shared grid of the branch separation."""
    if branch_a.grid.shape != branch_b.grid.shape or \
            not np.allclose(branch_a.grid, branch_b.grid):
        raise ValueError("branches must share the same tau grid")
    gap = float(np.min(np.abs(branch_a.values - branch_b.values)))
    if gap < GAP_TOLERANCE:
        raise GapCollapse(
            f"branch gap {gap:.3g} below tolerance {GAP_TOLERANCE}")
    return gap


def trace_both_branches(model, tau_grid: np.ndarray | None = None
                        ) -> tuple[QuasiStaticBranch, QuasiStaticBranch]:
    """Convenience: stable and unstable branches seeded at λ₋."""
    if tau_grid is None:
        tau_grid = default_tau_grid(model.ramp)
    lam0 = float(np.atleast_1d(model.ramp.eval(tau_grid[0]))[0])
    eqs = find_equilibria(model.field, lam0)
    stable = [e for e in eqs if e.stability is Stability.STABLE]
    unstable = [e for e in eqs if e.stability is Stability.UNSTABLE]
    if not stable or not unstable:
        raise NoRoots(
            f"need one stable and one unstable equilibrium at lambda={lam0:.6g}")
    bs = trace_branch(model.field, model.ramp, stable[-1], tau_grid)
    bu = trace_branch(model.field, model.ramp, unstable[-1], tau_grid)
    return bs, bu


_BRANCH_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def branches_for(model) -> tuple[QuasiStaticBranch, QuasiStaticBranch]:
    """Per-model cached (stable, unstable) branch pair on the default grid."""
    try:
        return _BRANCH_CACHE[model]
    except KeyError:
        pair = trace_both_branches(model)
        _BRANCH_CACHE[model] = pair
        return pair


def branch_csv_rows(branch: QuasiStaticBranch):
    """Rows (tau, lambda, x, dxf) for the delimited branch export."""
    return zip(branch.grid, branch.lambda_values, branch.values,
               branch.dxf_values)
