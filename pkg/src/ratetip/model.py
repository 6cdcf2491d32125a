"""Scalar vector fields f(x, λ), parameter ramps Λ(τ), and jet arithmetic.

The slow forcing enters through ``ẋ = f(x, Λ(rt))`` with Λ increasing from
λ₋ to λ₊. Everything downstream needs two things from a model: exact
high-order x-derivatives of f along curves (jets), and a quantified notion
of "Λ is asymptotically constant" (the tail contract ε_tail / τ_tail).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import OrderTooHigh, OutOfDomain, UsageError

#: default tolerance below which the ramp is treated as frozen at λ±
DEFAULT_TAIL_TOLERANCE = 1e-8

#: default trusted state interval; quadratic blow-up makes this mandatory
DEFAULT_X_MAX = 1e6


@dataclass(frozen=True)
class Jet:
    """Truncated Taylor polynomial of x ↦ f(x, λ) about a base point.

    ``coeffs[j]`` is the j-th Taylor coefficient, i.e. (∂ʲₓf)(x0, λ)/j!.
    """

    order: int
    coeffs: tuple[float, ...]

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("jet order must be nonnegative")
        if len(self.coeffs) != self.order + 1:
            raise ValueError("jet needs exactly order+1 coefficients")
        if not all(math.isfinite(c) for c in self.coeffs):
            raise ValueError("jet coefficients must be finite")

    def derivative(self, j: int) -> float:
        """∂ʲₓf at the base point (coefficient times j!)."""
        return self.coeffs[j] * math.factorial(j)

    def evaluate(self, dx: float) -> float:
        """Horner evaluation of the truncated polynomial at displacement dx."""
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * dx + c
        return acc


class ScalarField:
    """Contract for a scalar field f(x, λ).

    Subclasses provide ``eval``, ``jet_eval`` and ``param_deriv`` (∂_λf,
    a first-order-only hook used by the implicit-function-theorem branch
    derivative). ``bound_box`` is the rectangle on which f is trusted;
    outside it the field is treated as undefined.
    """

    #: (x_min, x_max, lambda_min, lambda_max)
    bound_box: tuple[float, float, float, float]
    #: maximum jet order supported, or None for unlimited (polynomials)
    max_jet_order: int | None = None

    def eval(self, x: float, lam: float) -> float:
        raise NotImplementedError

    def jet_eval(self, x0: float, lam: float, n: int) -> Jet:
        raise NotImplementedError

    def param_deriv(self, x: float, lam: float) -> float:
        raise NotImplementedError

    def in_box(self, x: float, lam: float) -> bool:
        x_min, x_max, l_min, l_max = self.bound_box
        return x_min <= x <= x_max and l_min <= lam <= l_max


class PolynomialField(ScalarField):
    """f(x, λ) = Σ c_{ij} xⁱ λʲ with exact jets via Taylor shift.

    ``terms`` maps (i, j) exponent pairs to coefficients. Jets are computed
    by synthetic division (in-place Horner shift), which is exact for
    polynomials up to roundoff.
    """

    def __init__(self, terms: dict[tuple[int, int], float],
                 bound_box: tuple[float, float, float, float] | None = None):
        if not terms:
            raise ValueError("polynomial field needs at least one term")
        self.terms = {k: float(v) for k, v in terms.items()}
        self.x_degree = max(i for i, _ in self.terms)
        self.lambda_degree = max(j for _, j in self.terms)
        self.bound_box = bound_box or (-DEFAULT_X_MAX, DEFAULT_X_MAX,
                                       -math.inf, math.inf)
        self.max_jet_order = None

    def x_poly_coeffs(self, lam):
        """Ascending coefficients of x ↦ f(x, λ); vectorized over λ."""
        lam = np.asarray(lam, dtype=float)
        out = np.zeros((self.x_degree + 1,) + lam.shape)
        for (i, j), c in self.terms.items():
            out[i] += c * lam ** j
        return out

    def eval(self, x, lam):
        p = self.x_poly_coeffs(lam)
        acc = np.zeros_like(np.asarray(x, dtype=float) * np.asarray(lam, dtype=float))
        for row in p[::-1]:
            acc = acc * x + row
        if acc.ndim == 0:
            return float(acc)
        return acc

    def jet_eval(self, x0: float, lam: float, n: int) -> Jet:
        shifted = self._shift(self.x_poly_coeffs(lam), x0)
        coeffs = tuple(float(shifted[j]) if j < len(shifted) else 0.0
                       for j in range(n + 1))
        return Jet(order=n, coeffs=coeffs)

    def jet_coeffs_many(self, x0, lam, n: int) -> np.ndarray:
        """Taylor coefficients 0..n at many base points; shape (n+1, len(x0))."""
        x0 = np.asarray(x0, dtype=float)
        shifted = self._shift(self.x_poly_coeffs(lam), x0)
        out = np.zeros((n + 1,) + x0.shape)
        m = min(n + 1, shifted.shape[0])
        out[:m] = shifted[:m]
        return out

    @staticmethod
    def _shift(p: np.ndarray, x0) -> np.ndarray:
        # re-center p (ascending in x) about x0 by repeated synthetic division
        b = np.array(p, dtype=float, copy=True)
        d = b.shape[0] - 1
        for j in range(d + 1):
            for i in range(d - 1, j - 1, -1):
                b[i] = b[i] + x0 * b[i + 1]
        return b

    def param_deriv(self, x, lam):
        acc = 0.0
        for (i, j), c in self.terms.items():
            if j > 0:
                acc = acc + c * j * (x ** i) * (lam ** (j - 1))
        return acc if isinstance(acc, np.ndarray) else float(acc)


# --- ramps -----------------------------------------------------------------

def _arctan_base(tau):
    return (2.0 / math.pi) * np.arctan(tau)


def _arctan_base_deriv(tau):
    return (2.0 / math.pi) / (1.0 + np.square(tau))


def _tanh_base(tau):
    return np.tanh(tau)


def _tanh_base_deriv(tau):
    return 1.0 / np.square(np.cosh(tau))


def _logistic_base(tau):
    # 2/(1+e^{-τ}) − 1, rescaled to (−1, 1); equals tanh(τ/2)
    return np.tanh(np.asarray(tau, dtype=float) / 2.0)


def _logistic_base_deriv(tau):
    return 0.5 / np.square(np.cosh(np.asarray(tau, dtype=float) / 2.0))


_RAMP_BASES = {
    "arctan": (_arctan_base, _arctan_base_deriv),
    "tanh": (_tanh_base, _tanh_base_deriv),
    "logistic": (_logistic_base, _logistic_base_deriv),
}

#: ramp kinds accepted in user model files
RAMP_CATALOGUE = ("arctan", "tanh", "logistic")


def _tail_time(kind: str, amplitude: float, eps: float) -> float:
    """Smallest τ beyond which both |Λ(±τ)−λ±| < eps and Λ'(±τ) < eps.

    Closed forms per ramp kind; the range condition is usually the binding
    one (dramatically so for arctan, whose tail decays only like 1/τ).
    """
    if amplitude == 0.0:
        return 0.0
    q = eps / amplitude
    if q >= 1.0:
        return 0.0
    if kind == "arctan":
        t_range = math.tan(0.5 * math.pi * (1.0 - q))
        t_deriv = math.sqrt(max(2.0 * amplitude / (math.pi * eps) - 1.0, 0.0))
    elif kind == "tanh":
        t_range = math.atanh(1.0 - q)
        t_deriv = math.acosh(math.sqrt(amplitude / eps)) if amplitude > eps else 0.0
    elif kind == "logistic":
        t_range = 2.0 * math.atanh(1.0 - q)
        arg = amplitude / (2.0 * eps)
        t_deriv = 2.0 * math.acosh(math.sqrt(arg)) if arg > 1.0 else 0.0
    else:
        raise UsageError(f"unknown ramp kind: {kind!r}")
    return max(t_range, t_deriv)


class RampFunction:
    """Monotone parameter sweep τ ↦ Λ(τ) with λ± limits and a tail contract.

    ``tau_tail`` is the declared horizon beyond which Λ is treated as frozen
    at λ± to tolerance ``tail_tolerance`` (both the value gap and the
    derivative are below it). The kind ``"constant"`` is the degenerate
    frozen ramp Λ ≡ λ₀; it deliberately violates strict monotonicity and is
    admitted for frozen-system analysis only.
    """

    def __init__(self, kind: str, lambda_minus: float, lambda_plus: float,
                 tail_tolerance: float = DEFAULT_TAIL_TOLERANCE):
        if kind == "constant":
            if lambda_minus != lambda_plus:
                raise UsageError("constant ramp requires lambda_minus == lambda_plus")
        elif kind not in _RAMP_BASES:
            raise UsageError(f"unknown ramp kind: {kind!r}")
        elif not lambda_minus < lambda_plus:
            raise UsageError("ramp requires lambda_minus < lambda_plus")
        if tail_tolerance <= 0:
            raise UsageError("tail_tolerance must be positive")
        self.kind = kind
        self.lambda_minus = float(lambda_minus)
        self.lambda_plus = float(lambda_plus)
        self.tail_tolerance = float(tail_tolerance)
        self._center = 0.5 * (lambda_plus + lambda_minus)
        self._amp = 0.5 * (lambda_plus - lambda_minus)
        if kind == "constant":
            self.tau_tail = 0.0
        else:
            self.tau_tail = _tail_time(kind, self._amp, self.tail_tolerance)

    def eval(self, tau):
        if isinstance(tau, (int, float)):
            # scalar fast path: the ODE right-hand side hits this per step
            k = self.kind
            if k == "constant":
                return self._center
            if k == "arctan":
                return self._center + self._amp * (2.0 / math.pi) * math.atan(tau)
            if k == "tanh":
                return self._center + self._amp * math.tanh(tau)
            return self._center + self._amp * math.tanh(tau / 2.0)
        if self.kind == "constant":
            tau = np.asarray(tau, dtype=float)
            out = np.full_like(tau, self._center)
            return float(out) if out.ndim == 0 else out
        base, _ = _RAMP_BASES[self.kind]
        out = self._center + self._amp * base(tau)
        return float(out) if np.ndim(out) == 0 else out

    def deriv(self, tau):
        if isinstance(tau, (int, float)):
            k = self.kind
            if k == "constant":
                return 0.0
            if k == "arctan":
                return self._amp * (2.0 / math.pi) / (1.0 + tau * tau)
            if k == "tanh":
                c = math.cosh(tau)
                return self._amp / (c * c)
            c = math.cosh(tau / 2.0)
            return 0.5 * self._amp / (c * c)
        if self.kind == "constant":
            tau = np.asarray(tau, dtype=float)
            out = np.zeros_like(tau)
            return float(out) if out.ndim == 0 else out
        _, dbase = _RAMP_BASES[self.kind]
        out = self._amp * dbase(tau)
        return float(out) if np.ndim(out) == 0 else out

    def __repr__(self):
        return (f"RampFunction({self.kind!r}, {self.lambda_minus}, "
                f"{self.lambda_plus})")


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Bundle of a scalar field and a ramp, plus identification.

    Instances compare (and hash) by identity so they can key weak caches.
    """

    name: str
    field: ScalarField
    ramp: RampFunction
    params: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        _, _, l_min, l_max = self.field.bound_box
        if not (l_min <= self.ramp.lambda_minus and self.ramp.lambda_plus <= l_max):
            raise UsageError("bound_box parameter range must cover [lambda_minus, lambda_plus]")

    def rhs(self, t: float, x: float, r: float) -> float:
        """Right-hand side of ẋ = f(x, Λ(rt))."""
        return self.field.eval(x, self.ramp.eval(r * t))


# --- operations ------------------------------------------------------------

def jet_eval(field: ScalarField, x0: float, lam: float, n: int) -> Jet:
    """Taylor coefficients of x ↦ f(x, λ) about x0 up to order n.

    Raises OrderTooHigh past the field's declared differentiability and
    OutOfDomain outside the trusted bounding box.
    """
    if n < 0:
        raise UsageError("jet order must be nonnegative")
    if field.max_jet_order is not None and n > field.max_jet_order:
        raise OrderTooHigh(
            f"jet order {n} exceeds the field's maximum {field.max_jet_order}")
    if not field.in_box(x0, lam):
        raise OutOfDomain(f"(x0, lambda) = ({x0}, {lam}) outside bound_box")
    return field.jet_eval(x0, lam, n)


@dataclass
class RampValidationReport:
    """Sampled-invariant report for a ramp; empty ``violations`` means clean."""

    violations: list[str]
    lambda_minus: float
    lambda_plus: float
    tau_tail: float

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_ramp(ramp: RampFunction, grid) -> RampValidationReport:
    """Check monotonicity/range on the given τ-grid and tail decay at ±τ_tail.

    Violations are report entries, not exceptions. Tail decay is evaluated
    analytically at the ramp's declared ±τ_tail, so the grid need not span
    the (possibly enormous) tail horizon.
    """
    grid = np.asarray(grid, dtype=float)
    violations: list[str] = []
    values = ramp.eval(grid)
    derivs = ramp.deriv(grid)

    if ramp.kind == "constant":
        # the degenerate frozen ramp is exempt from the sweep invariants;
        # only the range check is meaningful
        lo, hi = ramp.lambda_minus, ramp.lambda_plus
        if np.any(values != lo):
            violations.append("range: constant ramp deviates from lambda_0")
        return RampValidationReport(violations=violations, lambda_minus=lo,
                                    lambda_plus=hi, tau_tail=ramp.tau_tail)

    diffs = np.diff(values)
    if np.any(diffs <= 0):
        k = int(np.argmax(diffs <= 0))
        violations.append(
            f"monotonicity: eval not strictly increasing at tau={grid[k]:.6g} "
            f"({int(np.sum(diffs <= 0))} grid intervals affected)")
    lo, hi = ramp.lambda_minus, ramp.lambda_plus
    slack = 1e-12 * max(1.0, abs(lo), abs(hi))
    out_of_range = (values < lo - slack) | (values > hi + slack)
    if np.any(out_of_range):
        k = int(np.argmax(out_of_range))
        violations.append(
            f"range: eval({grid[k]:.6g}) = {values[k]:.6g} outside "
            f"[{lo:.6g}, {hi:.6g}]")
    if np.any(derivs <= 0):
        k = int(np.argmax(derivs <= 0))
        violations.append(
            f"derivative: deriv({grid[k]:.6g}) = {derivs[k]:.6g} not positive")

    eps = ramp.tail_tolerance
    tt = ramp.tau_tail
    # the analytic tail-time inverse (e.g. tan near pi/2) is ill-conditioned,
    # so allow a relative slack well above its float round-off
    for sgn, limit in ((-1.0, lo), (1.0, hi)):
        v = ramp.eval(sgn * tt)
        if abs(v - limit) > eps * (1 + 1e-6):
            violations.append(
                f"tail: |eval({sgn * tt:.6g}) - {limit:.6g}| = "
                f"{abs(v - limit):.3g} exceeds tail_tolerance {eps:.3g}")
        d = ramp.deriv(sgn * tt)
        if d > eps * (1 + 1e-6):
            violations.append(
                f"tail: deriv({sgn * tt:.6g}) = {d:.3g} exceeds "
                f"tail_tolerance {eps:.3g}")
    return RampValidationReport(violations=violations, lambda_minus=lo,
                                lambda_plus=hi, tau_tail=tt)


# --- registry and user models ----------------------------------------------

def _quad_field(zeta: float, lambda_minus: float, lambda_plus: float) -> PolynomialField:
    # f(x, λ) = −(x−λ)² + ζ = −x² + 2xλ − λ² + ζ
    return PolynomialField(
        {(2, 0): -1.0, (1, 1): 2.0, (0, 2): -1.0, (0, 0): zeta},
        bound_box=(-DEFAULT_X_MAX, DEFAULT_X_MAX, lambda_minus, lambda_plus),
    )


def quad_arctan(zeta: float = 0.1, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE) -> ModelSpec:
    """Quadratic field −(x−λ)² + ζ with the arctan ramp on [−1, 1]."""
    if zeta <= 0:
        raise UsageError("frozen system has no equilibria (zeta must be > 0)")
    ramp = RampFunction("arctan", -1.0, 1.0, tail_tolerance)
    return ModelSpec(name="quad_arctan", field=_quad_field(zeta, -1.0, 1.0),
                     ramp=ramp, params={"zeta": zeta})


def quad_tanh(zeta: float = 0.1, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE) -> ModelSpec:
    """Quadratic field −(x−λ)² + ζ with the tanh ramp on [−1, 1]."""
    if zeta <= 0:
        raise UsageError("frozen system has no equilibria (zeta must be > 0)")
    ramp = RampFunction("tanh", -1.0, 1.0, tail_tolerance)
    return ModelSpec(name="quad_tanh", field=_quad_field(zeta, -1.0, 1.0),
                     ramp=ramp, params={"zeta": zeta})


def frozen_quad(zeta: float = 0.1, lambda0: float = 0.0) -> ModelSpec:
    """Quadratic field with the frozen ramp Λ ≡ λ₀ (autonomous system)."""
    if zeta <= 0:
        raise UsageError("frozen system has no equilibria (zeta must be > 0)")
    field = PolynomialField(
        {(2, 0): -1.0, (1, 1): 2.0, (0, 2): -1.0, (0, 0): zeta},
        bound_box=(-DEFAULT_X_MAX, DEFAULT_X_MAX, lambda0, lambda0),
    )
    ramp = RampFunction("constant", lambda0, lambda0)
    return ModelSpec(name="quad_frozen", field=field, ramp=ramp,
                     params={"zeta": zeta, "lambda0": lambda0})


REGISTRY = {
    "quad_arctan": quad_arctan,
    "quad_tanh": quad_tanh,
    "quad_frozen": frozen_quad,
}


def get_model(name: str, **params) -> ModelSpec:
    """Look up a built-in model by name, or load a user model file by path."""
    if name in REGISTRY:
        return REGISTRY[name](**params)
    path = Path(name)
    if path.suffix or path.exists():
        if not path.exists():
            raise UsageError(f"model file not found: {name}")
        return parse_model_file(path)
    raise UsageError(
        f"unknown model {name!r}; built-ins: {', '.join(sorted(REGISTRY))}")


_TERM_RE = re.compile(
    r"""^\s*(?P<c>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*
        (?:\*\s*x(?:\^(?P<i>\d+))?\s*)?
        (?:\*\s*lambda(?:\^(?P<j>\d+))?\s*)?$""",
    re.VERBOSE,
)


def parse_model_text(text: str, name: str = "user_model") -> ModelSpec:
    """Parse the declarative model grammar.

    Three required lines: ``f:`` with monomial terms ``c * x^i * lambda^j``
    joined by ``+``, ``ramp:`` naming a catalogue ramp, and ``range:`` with
    λ₋ λ₊. Blank lines and ``#`` comments are ignored.
    """
    f_line = ramp_line = range_line = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("f:"):
            f_line = line[2:].strip()
        elif line.startswith("ramp:"):
            ramp_line = line[5:].strip()
        elif line.startswith("range:"):
            range_line = line[6:].strip()
        elif line.startswith("name:"):
            name = line[5:].strip()
        else:
            raise UsageError(f"unrecognized model-file line: {raw.strip()!r}")
    if f_line is None or ramp_line is None or range_line is None:
        raise UsageError("model file needs 'f:', 'ramp:' and 'range:' lines")

    terms: dict[tuple[int, int], float] = {}
    for term in f_line.split("+"):
        m = _TERM_RE.match(term)
        if not m:
            raise UsageError(
                f"bad term {term.strip()!r}; expected 'c * x^i * lambda^j'")
        c = float(m.group("c"))
        i = int(m.group("i")) if m.group("i") else (1 if "x" in term else 0)
        j = int(m.group("j")) if m.group("j") else (1 if "lambda" in term else 0)
        terms[(i, j)] = terms.get((i, j), 0.0) + c

    if ramp_line not in RAMP_CATALOGUE:
        raise UsageError(
            f"ramp {ramp_line!r} not in catalogue {RAMP_CATALOGUE}")
    try:
        lo_s, hi_s = range_line.split()
        lo, hi = float(lo_s), float(hi_s)
    except ValueError as e:
        raise UsageError("range: line needs two numbers (lambda_minus lambda_plus)") from e

    field = PolynomialField(terms, bound_box=(-DEFAULT_X_MAX, DEFAULT_X_MAX, lo, hi))
    ramp = RampFunction(ramp_line, lo, hi)
    return ModelSpec(name=name, field=field, ramp=ramp, params={})


def parse_model_file(path) -> ModelSpec:
    path = Path(path)
    return parse_model_text(path.read_text(), name=path.stem)
