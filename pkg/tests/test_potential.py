from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halfspace_jump_lab.errors import DegenerateSample, DivergentIntegrand, ParameterOutOfRange
from halfspace_jump_lab.kernel import BoxDomain, KernelParams
from halfspace_jump_lab.potential import (RatioReport, default_green_pairs, effective_exponent,
                                          exit_time_scaling_check, fit_exponent, green_bound_form,
                                          green_estimate, green_ratio_sweep, lifetime_divergence,
                                          n0_search, occupation_estimates, occupation_exponent,
                                          occupation_log_fit)
from halfspace_jump_lab.sim import EstimateWithCI, SimConfig


def test_ratio_report_statuses():
    rep = RatioReport([1, 2], [1.0, 1.5], [0.01, 0.01])
    assert rep.sup_inf_ratio == pytest.approx(1.5)
    assert rep.budget_status(2.0) == "pass"
    assert rep.budget_status(1.2) == "fail"
    assert rep.budget_status(1.5) == "inconclusive"
    assert rep.optimistic_ratio <= rep.sup_inf_ratio <= rep.pessimistic_ratio
    assert rep.contains(1.0).tolist() == [True, False]
    assert len(rep.rows()) == 2 and rep.to_dict()["sup_inf_ratio"] == rep.sup_inf_ratio


@given(st.lists(st.floats(0.1, 10.0), min_size=2, max_size=8), st.floats(1e-3, 1e3))
@settings(max_examples=100, deadline=None)
def test_ratio_invariant_under_rescaling(vals, c):
    a = RatioReport(list(range(len(vals))), vals, [0.0] * len(vals))
    b = RatioReport(list(range(len(vals))), [c * v for v in vals], [0.0] * len(vals))
    assert b.sup_inf_ratio == pytest.approx(a.sup_inf_ratio, rel=1e-12)


def test_fit_exponent_exact_power():
    x = [2.0 ** -k for k in range(3, 8)]
    f = fit_exponent(x, [3.0 * t ** 0.37 for t in x])
    assert f.slope == pytest.approx(0.37, abs=1e-12)
    assert f.intercept == pytest.approx(math.log(3.0), abs=1e-12)
    assert f.r_squared == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fit_exponent(x[:3], [1, 2, 3])
    with pytest.raises(DegenerateSample):
        fit_exponent(x, [1, 2, 0, 3, 4])


def test_log_fit_recovers_coefficients():
    P = KernelParams(1.5, 1)
    x = np.array([2.0 ** -k for k in range(10, 15)])
    vals = x ** 0.5 * (0.3 + 0.8 * np.log(1 / x))
    lf = occupation_log_fit(P, x, [EstimateWithCI(v, 0.0, 10) for v in vals], 1.0)
    assert lf.b == pytest.approx(0.8) and lf.a == pytest.approx(0.3) and lf.r_squared == pytest.approx(1.0)


def test_green_bound_form_symmetric_and_homogeneous():
    P = KernelParams(1.5, 2)
    x, y = np.array([0.0, 0.3]), np.array([0.7, 1.1])
    assert green_bound_form(P, x, y) == pytest.approx(green_bound_form(P, y, x))
    r = 3.0
    assert green_bound_form(P, r * x, r * y) == pytest.approx(r ** (1.5 - 2) * green_bound_form(P, x, y))


def test_default_green_pairs_geometry():
    pairs = default_green_pairs(2)
    assert len(pairs) == 12
    for x, y in pairs:
        assert x[-1] > 0 and y[-1] > 0
        assert np.linalg.norm(x - y) >= 0.5 - 1e-12


def test_guards():
    cfg = SimConfig()
    P = KernelParams(1.5, 1)
    with pytest.raises(DivergentIntegrand):
        occupation_estimates(P, cfg, -1.5, [0.1], BoxDomain.strip(1, 1.0), 2)
    with pytest.raises(DivergentIntegrand):
        occupation_estimates(P, cfg, -2.0, [0.1], BoxDomain.strip(1, 1.0), 2)
    with pytest.raises(ValueError):
        occupation_exponent(KernelParams(1.5, 2), cfg, 0.0, [0.1] * 4, BoxDomain.box(2, 0.2, 1.0), 1.0)
    # d = 1 fails d > min(alpha + beta1 + beta2, 2)
    with pytest.raises(ParameterOutOfRange):
        green_ratio_sweep(P, cfg, [([0.5], [1.0])], n_paths=2)
    P2 = KernelParams(1.5, 2)
    with pytest.raises(ValueError):
        green_estimate(P2, cfg, [0, 1.0], [0, 1.0], n_paths=2)
    with pytest.raises(ValueError):
        green_estimate(P2, cfg, [0, 1.0], [0, 2.0], rho=0.5, n_paths=2)
    with pytest.raises(ValueError):
        green_estimate(P2, SimConfig(eta_abs=0.1), [0, 1.0], [0, 1.5], n_paths=2)
    with pytest.raises(ParameterOutOfRange):
        lifetime_divergence(KernelParams(0.8, 1), cfg, [1.0], [1, 2], n_paths=2)


def test_effective_exponent_approaches_alpha_minus_one():
    P = KernelParams(1.5, 1)
    ps = [effective_exponent(P, d) for d in (0.2, 0.1, 0.05, 0.02)]
    assert all(0 < p < 0.5 for p in ps)
    assert ps == sorted(ps)
    assert ps[-1] == pytest.approx(0.454, abs=0.005)


def test_green_estimate_positive_and_scaled():
    P = KernelParams(1.5, 2)
    cfg = SimConfig(delta=0.1, seed=3)
    g = green_estimate(P, cfg, [0.0, 1.0], [0.6, 1.8], n_paths=2000)
    assert g.mean > 0 and g.std_error > 0


def test_scaling_check_ratio_near_one():
    P = KernelParams(1.5, 2)
    rep = exit_time_scaling_check(P, SimConfig(delta=0.1, seed=6), [0.0, 0.2], BoxDomain.strip(2, 1.0),
                                  [0.5, 2.0], n_paths=4000)
    assert np.all(rep.contains(1.0, slack=0.05))


def test_lifetime_and_n0_small():
    P = KernelParams(1.5, 1)
    res = lifetime_divergence(P, SimConfig(delta=0.1, seed=2), [1.0], [1.0, 2.0, 4.0, 8.0], n_paths=2000)
    assert np.all(np.array(res["increments"]) > 0)
    assert res["fit"] is not None and res["fit"].slope > 0
    n0 = n0_search(P, SimConfig(delta=0.1, seed=2), [1.0], n_paths=2000)
    probs = list(n0["probabilities"].values())
    assert probs == sorted(probs)
    assert n0["n0"] is not None and n0["probabilities"][n0["n0"]] > 0.5
