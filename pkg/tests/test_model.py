"""Fields, ramps, jets, the model grammar, and ramp validation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ratetip.errors import UsageError
from ratetip.model import (RampFunction, get_model, jet_eval, parse_model_text,
                           quad_arctan, quad_tanh, frozen_quad, validate_ramp)

ZETA = 0.1


# --- field and jets ----------------------------------------------------------

def test_field_matches_closed_form():
    model = quad_arctan(zeta=ZETA)
    for x, lam in [(0.0, 0.0), (0.5, -0.3), (-1.2, 0.9)]:
        assert model.field.eval(x, lam) == pytest.approx(ZETA - (x - lam) ** 2)


def test_rhs_composes_field_with_ramp():
    model = quad_arctan(zeta=ZETA)
    r, t, x = 0.3, 2.0, 0.4
    lam = model.ramp.eval(r * t)
    assert model.rhs(t, x, r) == pytest.approx(ZETA - (x - lam) ** 2)


@given(x=st.floats(-3, 3), lam=st.floats(-1, 1))
def test_jet_coefficients_match_quadratic_derivatives(x, lam):
    field = quad_arctan(zeta=ZETA).field
    jet = jet_eval(field, x, lam, 3)
    # f = ζ − (x−λ)²: Taylor coefficients in x are [f, −2(x−λ), −1, 0]
    assert jet.coeffs[0] == pytest.approx(ZETA - (x - lam) ** 2, abs=1e-12)
    assert jet.coeffs[1] == pytest.approx(-2 * (x - lam), abs=1e-12)
    assert jet.coeffs[2] == pytest.approx(-1.0, abs=1e-12)
    assert jet.coeffs[3] == pytest.approx(0.0, abs=1e-12)


def test_param_derivative():
    field = quad_arctan(zeta=ZETA).field
    x, lam = 0.7, -0.2
    assert field.param_deriv(x, lam) == pytest.approx(2 * (x - lam))


# --- ramps -------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["arctan", "tanh"])
def test_ramp_endpoints_and_monotonicity(kind):
    ramp = RampFunction(kind, -1.0, 1.0)
    taus = np.linspace(-15, 15, 301)
    values = ramp.eval(taus)
    assert np.all(np.diff(values) > 0)
    assert np.all(ramp.deriv(taus) > 0)
    assert ramp.eval(0.0) == pytest.approx(0.0, abs=1e-14)
    assert abs(ramp.eval(-ramp.tau_tail) - (-1.0)) <= ramp.tail_tolerance * (1 + 1e-6)
    assert abs(ramp.eval(ramp.tau_tail) - 1.0) <= ramp.tail_tolerance * (1 + 1e-6)


@given(tau=st.floats(-30, 30))
@settings(max_examples=50)
def test_ramp_odd_symmetry(tau):
    for kind in ("arctan", "tanh"):
        ramp = RampFunction(kind, -1.0, 1.0)
        assert ramp.eval(-tau) == pytest.approx(-ramp.eval(tau), abs=1e-14)


def test_arctan_ramp_closed_form():
    ramp = RampFunction("arctan", -1.0, 1.0)
    assert ramp.eval(1.0) == pytest.approx(2 / math.pi * math.atan(1.0))
    assert ramp.deriv(0.0) == pytest.approx(2 / math.pi)


def test_constant_ramp_is_frozen():
    ramp = RampFunction("constant", 0.25, 0.25)
    taus = np.linspace(-5, 5, 11)
    assert np.all(ramp.eval(taus) == 0.25)
    assert np.all(ramp.deriv(taus) == 0.0)


# --- ramp validation ---------------------------------------------------------

def test_validate_arctan_clean():
    ramp = RampFunction("arctan", -1.0, 1.0)
    report = validate_ramp(ramp, np.arange(-50.0, 50.0, 0.1))
    assert report.ok, report.violations


def test_validate_tanh_clean():
    ramp = RampFunction("tanh", -1.0, 1.0)
    report = validate_ramp(ramp, np.linspace(-15, 15, 301))
    assert report.ok, report.violations


def test_validate_constant_clean():
    report = validate_ramp(RampFunction("constant", 0.0, 0.0),
                           np.linspace(-5, 5, 101))
    assert report.ok, report.violations


class _DecreasingRamp:
    """Duck-typed stand-in violating monotonicity: Λ(τ) = −(2/π)arctan(τ)."""

    kind = "arctan"
    lambda_minus = -1.0
    lambda_plus = 1.0
    tail_tolerance = 1e-8
    tau_tail = RampFunction("arctan", -1.0, 1.0).tau_tail

    def eval(self, tau):
        return -(2 / math.pi) * np.arctan(tau)

    def deriv(self, tau):
        return -(2 / math.pi) / (1 + np.asarray(tau) ** 2)


def test_validate_flags_decreasing_ramp():
    report = validate_ramp(_DecreasingRamp(), np.linspace(-10, 10, 201))
    assert not report.ok
    text = " ".join(report.violations)
    assert "monotonicity" in text
    assert "derivative" in text


# --- registry and factories --------------------------------------------------

def test_registry_lookup():
    assert get_model("quad_arctan").name == "quad_arctan"
    assert get_model("quad_tanh", zeta=0.5).params["zeta"] == 0.5
    assert get_model("quad_frozen").ramp.kind == "constant"


def test_unknown_model_name():
    with pytest.raises(UsageError, match="built-ins"):
        get_model("nope_such_model")


def test_missing_model_file():
    with pytest.raises(UsageError, match="not found"):
        get_model("does/not/exist.model")


@pytest.mark.parametrize("factory", [quad_arctan, quad_tanh, frozen_quad])
def test_nonpositive_zeta_rejected(factory):
    with pytest.raises(UsageError, match="no equilibria"):
        factory(zeta=0.0)


# --- model-file grammar ------------------------------------------------------

QUAD_TEXT = """
# the study model, spelled out as monomials
f: 0.1 + -1 * x^2 + 2 * x * lambda + -1 * lambda^2
ramp: arctan
range: -1 1
"""


def test_parse_model_text_matches_builtin():
    parsed = parse_model_text(QUAD_TEXT)
    builtin = quad_arctan(zeta=ZETA)
    for x, lam in [(0.0, 0.0), (0.4, -0.7), (-1.1, 0.3)]:
        assert parsed.field.eval(x, lam) == pytest.approx(
            builtin.field.eval(x, lam), abs=1e-14)
    assert parsed.ramp.kind == "arctan"


def test_parse_model_text_rejects_bad_term():
    with pytest.raises(UsageError, match="bad term"):
        parse_model_text("f: 1 * y^2\nramp: arctan\nrange: -1 1")


def test_parse_model_text_rejects_unknown_ramp():
    with pytest.raises(UsageError, match="catalogue"):
        parse_model_text("f: 1\nramp: heaviside\nrange: -1 1")


def test_parse_model_text_requires_all_lines():
    with pytest.raises(UsageError, match="needs"):
        parse_model_text("f: 1\nramp: arctan")


def test_parse_model_text_rejects_stray_line():
    with pytest.raises(UsageError, match="unrecognized"):
        parse_model_text("f: 1\nramp: arctan\nrange: -1 1\nwhat: ever")


def test_parse_model_file_roundtrip(tmp_path):
    path = tmp_path / "study.model"
    path.write_text(QUAD_TEXT)
    parsed = get_model(str(path))
    assert parsed.name == "study"
    assert parsed.field.eval(0.0, 0.0) == pytest.approx(ZETA)
