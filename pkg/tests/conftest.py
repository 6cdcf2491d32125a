"""Shared fixtures.

The expensive objects (branch traces, series fits with their pullback
oracle cache, the full detection report, the refined critical rate) are
built once per session and shared between the unit tests and the
acceptance tests.
"""

import numpy as np
import pytest

from ratetip.asymptotics import build_series_approximation, compute_coefficients
from ratetip.equilibria import branches_for
from ratetip.figures import refine_critical_rate
from ratetip.model import quad_arctan
from ratetip.tipping import detect_tipping, pullback_gap

ZETA = 0.1


@pytest.fixture(scope="session")
def model():
    return quad_arctan(zeta=ZETA)


@pytest.fixture(scope="session")
def branches(model):
    return branches_for(model)


@pytest.fixture(scope="session")
def coeff_pair(model, branches):
    """Order-3 coefficient tables for both branches (lower orders read
    from the same tables via the ``order=`` argument of partial_sum)."""
    branch_s, branch_u = branches
    series_s = compute_coefficients(branch_s, model.field, model.ramp, 3)
    series_u = compute_coefficients(branch_u, model.field, model.ramp, 3)
    return series_s, series_u


@pytest.fixture(scope="session")
def series_fits(model):
    """Stable-branch approximations with error fits for n = 1, 2, 3.

    The pullback-oracle cache is shared so each reference solve at
    tolerance 1e-10 happens once for all three orders.
    """
    cache = {}
    return {n: build_series_approximation(model, "stable", n, cache=cache)
            for n in (1, 2, 3)}


@pytest.fixture(scope="session")
def report(model):
    """Full n=1 detection on the tipping model (oracle + indicator)."""
    return detect_tipping(model, n=1)


@pytest.fixture(scope="session")
def oracle_r_star(model):
    """Critical rate from a dense sweep of the pullback collision gap.

    Independent of the probe detector: sweeps sign(x^r_-(0) - x^r_+(0))
    on a uniform r grid and bisects the sign-change cell.
    """
    rs = np.linspace(0.2, 0.36, 17)
    signs = [pullback_gap(model, float(r)) > 0 for r in rs]
    flips = [k for k in range(len(rs) - 1) if signs[k] and not signs[k + 1]]
    assert len(flips) == 1, "collision gap must change sign exactly once"
    k = flips[0]
    return refine_critical_rate(model, (float(rs[k]), float(rs[k + 1])),
                                rel_width=1e-6)
