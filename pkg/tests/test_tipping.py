"""Probe discriminants, detection, the δ-curve, and the stability indicator."""

import math

import numpy as np
import pytest

from ratetip.errors import MathPreconditionError, UsageError
from ratetip.model import parse_model_text, quad_arctan
from ratetip.tipping import (Classification, ProbeConfig, d_in, d_out,
                             probe_trajectories,
                             delta_curve, detect_tipping,
                             end_point_tracking_check, fig5_pairs,
                             indicator_crossing, late_proximity_check,
                             min_pullback_gap, probe_solutions, pullback_gap,
                             stability_indicator)

ZETA = 0.1
SQZ = math.sqrt(ZETA)


# --- configuration guards ----------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    dict(n=-1, epsilon=0.2, tau=30.0, r=0.1),
    dict(n=1, epsilon=0.0, tau=30.0, r=0.1),
    dict(n=1, epsilon=-0.1, tau=30.0, r=0.1),
    dict(n=1, epsilon=0.2, tau=-1.0, r=0.1),
    dict(n=1, epsilon=0.2, tau=30.0, r=0.0),
])
def test_probe_config_rejects_bad_values(kwargs):
    with pytest.raises(UsageError):
        ProbeConfig(**kwargs)


def test_epsilon_above_half_gap_rejected(model, coeff_pair):
    series_s, series_u = coeff_pair
    config = ProbeConfig(n=1, epsilon=0.4, tau=30.0, r=0.05)  # d0/2 ≈ 0.316
    with pytest.raises(UsageError, match="d_0/2"):
        probe_solutions(model, series_s, series_u, config)


# --- discriminants -----------------------------------------------------------

def test_discriminants_at_tau_zero_are_anchor_gaps(model, coeff_pair):
    series_s, series_u = coeff_pair
    config = ProbeConfig(n=1, epsilon=0.2, tau=0.0, r=0.05)
    out = d_out(model, series_s, series_u, config)
    inn = d_in(model, series_s, series_u, config)
    # at τ = 0 the probes are the anchors themselves, so the two
    # discriminants differ by exactly 4ε around the series gap
    assert out.d_out - inn.d_in == pytest.approx(4 * config.epsilon, abs=1e-12)
    assert out.d_out > 0 and inn.d_in > 0
    assert out.flags == [] and inn.flags == []


def test_discriminants_positive_below_critical(model, coeff_pair):
    series_s, series_u = coeff_pair
    config = ProbeConfig(n=1, epsilon=0.2, tau=30.0, r=0.1)
    assert d_out(model, series_s, series_u, config).d_out > 0
    assert d_in(model, series_s, series_u, config).d_in > 0


def test_discriminants_negative_above_critical(model, coeff_pair):
    # past the critical rate the pullback solutions swap order at t = 0;
    # the probe legs still complete (the blow-down happens later), so the
    # discriminants are finite and negative
    series_s, series_u = coeff_pair
    config = ProbeConfig(n=1, epsilon=0.2, tau=30.0, r=0.5)
    out = d_out(model, series_s, series_u, config)
    inn = d_in(model, series_s, series_u, config)
    assert -1.0 < out.d_out < 0
    assert -1.0 < inn.d_in < 0
    assert out.flags == [] and inn.flags == []


def test_probe_trajectories_blow_up_past_critical(model, coeff_pair):
    # extending the probe legs across the whole window exposes the blow-up
    series_s, series_u = coeff_pair
    config = ProbeConfig(n=1, epsilon=0.2, tau=30.0, r=0.35)
    trajs = probe_trajectories(model, series_s, series_u, config,
                               (-30.0, 30.0), which="out")
    y_minus, y_plus = trajs["y_minus"], trajs["y_plus"]
    assert y_minus.status.value == "escaped" and y_minus.escape_sign == -1
    assert y_plus.status.value == "escaped" and y_plus.escape_sign == 1
    assert 0 < y_minus.t_escape < 30
    # the model is odd under (x, λ, t) → (−x, −λ, −t), so the two legs
    # blow up at mirror-image times
    assert y_plus.t_escape == pytest.approx(-y_minus.t_escape, abs=1e-6)


def test_probe_set_outer_only(model, coeff_pair):
    series_s, series_u = coeff_pair
    config = ProbeConfig(n=1, epsilon=0.2, tau=10.0, r=0.1)
    probes = probe_solutions(model, series_s, series_u, config, which="out")
    assert probes.y_minus is not None and probes.y_plus is not None
    assert probes.z_minus is None and probes.z_plus is None


# --- detection ---------------------------------------------------------------

def test_detection_classifies_visible_tipping(report, oracle_r_star):
    assert report.classification is Classification.VISIBLE_TIPPING
    lo, hi = report.bracket
    assert lo < oracle_r_star < hi
    assert report.r_star == pytest.approx(0.5 * (lo + hi))
    assert report.uncertainty == pytest.approx(0.5 * (hi - lo))
    assert (hi - lo) / report.r_star < 2e-3


def test_detection_evidence_trail(report):
    stages = {record["stage"] for record in report.evidence}
    assert {"scan", "bisection", "panel", "oracle"} <= stages
    for record in report.evidence:
        if "d_out" in record:
            assert {"r", "tau", "d_out", "d_in", "flags"} <= set(record)


def test_detection_report_schema(report):
    payload = report.to_json_dict()
    assert set(payload) == {"model", "n", "epsilon", "tau", "bracket",
                            "r_star", "classification", "delta_curve",
                            "indicator_curve", "evidence"}
    assert payload["classification"] == "visible_tipping"
    result = payload["evidence"][-1]
    assert result["stage"] == "result"
    assert result["r_star"] == report.r_star
    assert result["uncertainty"] == report.uncertainty


def test_detection_indicator_curve_brackets_crossing(report):
    rs = [r for r, _ in report.indicator_curve]
    values = [v for _, v in report.indicator_curve]
    assert values[0] < 0  # stable at the slow end
    assert report.indicator_crossing_r is not None
    assert min(rs) < report.indicator_crossing_r < max(rs)


def test_detection_needs_tracking_at_lower_rate(model):
    # r_range starting above the critical rate violates the small-r regime
    with pytest.raises(MathPreconditionError):
        detect_tipping(model, n=1, r_range=(0.29, 0.5), with_oracle=False,
                       with_indicator=False)


def test_scale_equivariance(report):
    # doubling the field halves the time scale, so the critical rate doubles
    doubled = parse_model_text(
        "f: 0.2 + -2 * x^2 + 4 * x * lambda + -2 * lambda^2\n"
        "ramp: arctan\nrange: -1 1", name="doubled")
    fast = detect_tipping(doubled, n=1, epsilon=0.2, tau=30.0,
                          r_range=(0.1, 2.0), with_oracle=False,
                          with_indicator=False)
    lo, hi = fast.bracket
    ref_lo, ref_hi = report.bracket
    assert max(lo / 2, ref_lo) < min(hi / 2, ref_hi)  # scaled brackets overlap


# --- δ-curve -----------------------------------------------------------------

def test_delta_curve_monotone(model, report, coeff_pair):
    series_s, series_u = coeff_pair
    samples = delta_curve(model, 1, 0.2, report.r_star,
                          tau_grid=[0.0, 5.0, 10.0],
                          series_s=series_s, series_u=series_u)
    deltas = [s.delta for s in samples]
    assert deltas[0] == pytest.approx(0.165, abs=5e-3)
    assert deltas[0] > deltas[1] > deltas[2] > 0
    for s in samples:
        assert s.r_edge is not None
        assert s.delta == pytest.approx(report.r_star - s.r_edge)
    pairs = fig5_pairs(samples, report.r_star)
    assert [p[1] for p in pairs] == [report.r_star - d for d in deltas]


# --- stability indicator -----------------------------------------------------

def test_indicator_signs(model):
    assert stability_indicator(model, 0.05) < 0
    assert stability_indicator(model, 0.26) > 0


def test_indicator_crossing_location(model):
    crossing = indicator_crossing(model, 0.05, 0.26)
    assert crossing == pytest.approx(0.2147, abs=2e-3)


def test_indicator_crossing_needs_sign_change(model):
    with pytest.raises(MathPreconditionError):
        indicator_crossing(model, 0.01, 0.05)


# --- pullback gaps -----------------------------------------------------------

def test_pullback_gap_signs(model):
    assert pullback_gap(model, 0.2) > 0
    assert -1.0 < pullback_gap(model, 0.35) < 0  # visible order swap


def test_min_pullback_gap_positive_below_critical(model):
    assert 0 < min_pullback_gap(model, 0.15) < 2 * SQZ


# --- tracking and proximity checks --------------------------------------------

def test_tracking_certificate_below_validity(model, series_fits, coeff_pair):
    _, series_u = coeff_pair
    verdict = end_point_tracking_check(model, series_fits[1], series_u,
                                       r=0.05, epsilon=0.2, T=60.0)
    assert verdict.certified
    assert verdict.margin > 0
    assert verdict.flag == "empirical-constant"


def test_tracking_certificate_refused_above_validity(model, series_fits,
                                                     coeff_pair):
    _, series_u = coeff_pair
    verdict = end_point_tracking_check(model, series_fits[1], series_u,
                                       r=0.5, epsilon=0.2)
    assert not verdict.certified


def test_late_proximity_found(model):
    verdict = late_proximity_check(model, r=0.15, epsilon=0.05, T=40.0)
    assert verdict.found
    assert verdict.t_eps is not None
    assert "diagnostic" in verdict.caveat
