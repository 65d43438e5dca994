from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from halfspace_jump_lab.errors import EmptyFunction, NonIntegrableProfile, ParameterOutOfRange
from halfspace_jump_lab.kernel import KernelParams, model_b_lengths
from halfspace_jump_lab.nonlocal_ops import (constant_C, dirichlet_energy, hardy_lower_bound,
                                             hardy_ratio, lateral_factor, pv_apply,
                                             pv_apply_truncated, truncated_op, weighted_norm)
from halfspace_jump_lab.potential import fit_exponent
from halfspace_jump_lab.profiles import ConstantProfile, PowerProfile, ZeroProfile, smooth_bump, triangle_bump

from conftest import BETAS
from test_quad import graded_trapezoid


def c_oracle_1d(P, p, n=1_000_000):
    """d = 1 constant by a graded trapezoid rule (independent of the folded substitution)."""
    a = P.alpha

    def g(s, om):
        with np.errstate(divide="ignore"):
            ls = np.where(om < 0.5, np.log1p(-np.minimum(om, 0.5)), np.log(s))
        b = model_b_lengths(P, 1.0, s, om)
        return -np.expm1(p * ls) * np.expm1((a - p - 1) * ls) * om ** (-1 - a) * b

    return graded_trapezoid(g, n)


# pinned after agreement with c_oracle_1d (difference below 1e-11)
C_PLAIN_12 = 4.130057454523838
C_PLAIN_03 = -0.19918103015970795


def test_constant_regression_values(plain):
    r = constant_C(plain, 1.2)
    assert r.value == pytest.approx(C_PLAIN_12, rel=1e-9)
    assert r.value == pytest.approx(c_oracle_1d(plain, 1.2), abs=1e-8)
    assert abs(r.value - c_oracle_1d(plain, 1.2)) <= 5 * r.error + 1e-11
    n = constant_C(plain, 0.3)
    assert n.value < 0
    assert n.value == pytest.approx(C_PLAIN_03, rel=1e-8)
    assert n.value == pytest.approx(c_oracle_1d(plain, 0.3), abs=1e-8)


@pytest.mark.parametrize("p", [-0.5, 0.2, 0.7, 1.3, 1.6])
def test_constant_against_trapezoid_oracle(beta, p):
    P = KernelParams(1.5, 1, beta)
    if p >= P.alpha + P.beta1:
        with pytest.raises(ParameterOutOfRange):
            constant_C(P, p)
        return
    assert constant_C(P, p).value == pytest.approx(c_oracle_1d(P, p), abs=2e-8, rel=1e-8)


@pytest.mark.parametrize("beta", [(0.0, 0.0, 0.0, 0.0), (0.5, 0.3, 0.0, 0.0), (0.5, 0.4, 0.5, 0.5)])
def test_constant_d2_against_monte_carlo(beta):
    # u ~ Student t with nu = 1 + alpha (scaled) matches (1 + u^2)^(-(2+alpha)/2);
    # s ~ Beta(2 + alpha - p... ) absorbs both endpoint singularities
    a, p = 1.5, 1.2
    P = KernelParams(a, 2, beta)
    rng = np.random.default_rng(2024)
    n = 1_000_000
    nu = 1 + a
    u = rng.standard_t(nu, n) / math.sqrt(nu)
    lat_norm = special.beta(0.5, (1 + a) / 2)
    ea, eb = a - p, 2 - a  # densities s^(a-p-1) (1-s)^(1-a)
    s = rng.beta(ea, eb, n)
    om = 1 - s
    dens_s = s ** (ea - 1) * om ** (eb - 1) / special.beta(ea, eb)
    b = model_b_lengths(P, 1.0, s, om * np.sqrt(1 + u * u))
    f = np.expm1(p * np.log(s)) * -np.expm1((a - p - 1) * np.log(s)) * om ** (-1 - a) * b
    w = f / dens_s * lat_norm
    mc, se = w.mean(), w.std() / math.sqrt(n)
    assert abs(constant_C(P, p).value - mc) <= 3 * se
    assert se / abs(mc) < 2e-3


def test_constant_zeros_and_signs():
    for a in (1.2, 1.5, 1.8):
        for beta in BETAS:
            P = KernelParams(a, 1, beta)
            assert constant_C(P, 0.0).value == 0.0
            assert constant_C(P, a - 1).value == 0.0
            assert abs(constant_C(P, a - 1 + 1e-10).value) < 1e-8
            assert constant_C(P, 0.5 * (a - 1)).value < 0
            assert constant_C(P, a - 1 + 0.5 * (1 + P.beta1)).value > 0


def test_constant_divergence_at_upper_end(beta):
    P = KernelParams(1.5, 1, beta)
    vals = [constant_C(P, P.alpha + P.beta1 - 10.0 ** -k).value for k in (1, 2, 3)]
    assert vals[0] < vals[1] < vals[2]


def test_constant_rejects_out_of_range(plain):
    with pytest.raises(ParameterOutOfRange):
        constant_C(plain, -1.0)
    with pytest.raises(ParameterOutOfRange):
        constant_C(plain, 1.5)


@given(st.floats(0.02, 0.98), st.sampled_from(BETAS), st.sampled_from([1.2, 1.5, 1.8]))
@settings(max_examples=25, deadline=None)
def test_constant_reflection_symmetry(t, beta, a):
    # the integrand is symmetric in (p, alpha - 1 - p); stay inside both admissible ranges
    P = KernelParams(a, 1, beta)
    lo, hi = max(-1.0, -1.0 - P.beta1) + 0.05, a + P.beta1 - 0.05
    lo = max(lo, a - 1 - hi)
    hi = min(hi, a - 1 - lo)
    p = lo + t * (hi - lo)
    c1 = constant_C(P, p)
    c2 = constant_C(P, a - 1 - p)
    assert abs(c1.value - c2.value) <= 10 * (c1.error + c2.error) + 1e-9 * abs(c1.value)


def lateral_direct(P, xd, z):
    h = abs(z - xd)
    d, a = P.d, P.alpha

    def f(r):
        dist = math.hypot(h, r)
        b = float(model_b_lengths(P, xd, z, dist))
        return b * r ** (d - 2) * dist ** (-d - a)

    area = 2 * math.pi ** ((d - 1) / 2) / math.gamma((d - 1) / 2)
    pts = [t for t in (math.sqrt(max(min(xd, z) ** 2 - h * h, 0)), math.sqrt(max(max(xd, z) ** 2 - h * h, 0))) if t > 0]
    val = integrate.quad(f, 0, 10 * (h + xd + z), points=pts or None, limit=400, epsabs=1e-13, epsrel=1e-11)[0]
    val += integrate.quad(f, 10 * (h + xd + z), np.inf, limit=400, epsabs=1e-13, epsrel=1e-11)[0]
    return area * val * h ** (1 + a)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("z", [0.01, 0.3, 0.9, 1.1, 1.6, 3.0, 40.0])
def test_lateral_factor_against_direct_integration(d, z):
    P = KernelParams(1.5, d, (0.5, 0.4, 0.5, 0.5))
    ki, ke = lateral_factor(P, 1.0, z)
    assert float(ki + ke) == pytest.approx(lateral_direct(P, 1.0, z), rel=2e-8)


def test_pv_power_profiles(beta):
    for d in (1, 2):
        P = KernelParams(1.5, d, beta)
        for p in (0.3, 1.2):
            C = constant_C(P, p).value
            scaled = []
            for xd in (0.25, 0.5, 1.0, 2.0, 4.0):
                v = pv_apply(P, PowerProfile(p), xd).value
                assert v == pytest.approx(C * xd ** (p - 1.5), rel=1e-4)
                scaled.append(v / xd ** (p - 1.5))
            assert max(scaled) / min(scaled) - 1 < 1e-3 if C > 0 else max(scaled) / min(scaled) > 0.999
            fit = fit_exponent([0.25, 0.5, 1.0, 2.0, 4.0],
                               [abs(pv_apply(P, PowerProfile(p), x).value) for x in (0.25, 0.5, 1, 2, 4)])
            assert fit.slope == pytest.approx(p - 1.5, abs=1e-3)


@pytest.mark.parametrize("beta", [(0.0, 0.0, 0.0, 0.0), (0.5, 0.3, 0.0, 0.0)])
def test_pv_harmonic_power_vanishes(beta):
    for d in (1, 2):
        P = KernelParams(1.5, d, beta)
        for xd in (0.25, 1.0, 4.0):
            v = pv_apply(P, PowerProfile(0.5), np.r_[np.zeros(d - 1), xd]).value
            assert abs(v) <= 1e-5 / xd * max(1.0, xd ** 0.5)


def test_pv_constant_and_decomposition(plain):
    assert pv_apply(plain, ConstantProfile(3.0), 0.7).value == 0.0
    r = pv_apply(KernelParams(1.5, 2, (0.5, 0.3, 0, 0)), PowerProfile(1.2), 1.0)
    assert sum(r.decomposition) == pytest.approx(r.value, rel=1e-14)
    assert r.decomposition[1] != 0.0
    assert pv_apply(plain, PowerProfile(1.2), 1.0).decomposition[1] == 0.0
    with pytest.raises(ParameterOutOfRange):
        pv_apply(plain, PowerProfile(1.6), 1.0)


def pv_bump_oracle_1d(P, u, x):
    """Symmetrized principal value with scipy's QUADPACK (independent engine)."""
    a = P.alpha

    def b(y):
        return float(model_b_lengths(P, x, y, abs(y - x)))

    def sym(h):
        if h < 1e-3 * x:
            # B = 1 this close; second difference by its Taylor term (error O(h^4))
            return float(u.d2(x)) * h ** (1 - a)
        return ((u.value(x + h) - u.value(x)) * b(x + h) + (u.value(x - h) - u.value(x)) * b(x - h)) * h ** (-1 - a)

    pts = sorted({abs(t - x) for t in (*u.support, *u.breakpoints) if 0 < abs(t - x) < x} | {x / 2})
    inner = integrate.quad(sym, 0, x, points=pts, limit=500, epsabs=1e-11, epsrel=1e-10)[0]
    right = lambda h: (u.value(x + h) - u.value(x)) * b(x + h) * h ** (-1 - a)  # noqa: E731
    pts = [t - x for t in (*u.support, *u.breakpoints) if t - x > x]
    outer = integrate.quad(right, x, 50.0, points=pts or None, limit=500, epsabs=1e-12, epsrel=1e-10)[0]
    outer += integrate.quad(right, 50.0, np.inf, epsabs=1e-13)[0]
    return inner + outer


@pytest.mark.parametrize("beta", [(0.0, 0.0, 0.0, 0.0), (0.5, 0.3, 0.0, 0.0), (0.5, 0.4, 0.5, 0.5)])
@pytest.mark.parametrize("x", [0.6, 1.0, 1.7, 3.5])
def test_pv_bump_against_quadpack(beta, x):
    P = KernelParams(1.5, 1, beta)
    u = smooth_bump(1.5, 0.8)
    got = pv_apply(P, u, x).value
    assert got == pytest.approx(pv_bump_oracle_1d(P, u, x), abs=2e-6, rel=2e-6)


def test_pv_rejects_fast_growth(plain):
    with pytest.raises(ParameterOutOfRange):
        pv_apply(plain, PowerProfile(1.5), 1.0)


def test_truncated_power_operator():
    P = KernelParams(1.5, 2)
    zs = [0.02, 0.1, 0.3, 0.45]
    vals = [pv_apply_truncated(P, 0.5, 1.0, [c, zd]) for zd in zs for c in (0.0, 0.3)]
    assert all(v <= 0 for v in vals)
    far = [pv_apply_truncated(KernelParams(1.5, 1), 0.5, R, [0.25]) for R in (1, 10, 100)]
    assert abs(far[2]) < abs(far[1]) < abs(far[0])
    # the removed tail decays like 1/R
    assert far[1] / far[2] == pytest.approx(10.0, rel=0.1)
    ratios = [pv_apply_truncated(KernelParams(1.5, 1), 1.2, 1.0, [2.0 ** -k]) / 2.0 ** (-k * -0.3)
              for k in range(4, 11)]
    assert min(ratios) > 0 and max(ratios) / min(ratios) <= 10
    with pytest.raises(ValueError):
        pv_apply_truncated(P, 0.5, 1.0, [0.0, 0.6])
    with pytest.raises(ParameterOutOfRange):
        pv_apply_truncated(P, 0.3, 1.0, [0.0, 0.2])


def test_truncated_operator_bounds_and_limit():
    P = KernelParams(1.5, 1)
    assert truncated_op(P, 0.0, 1.0, 0.1) == 0.0
    for p in (0.3, 1.2):
        c_hat = max(abs(truncated_op(P, p, x, x / k)) / x ** (p - 1.5)
                    for x in (0.5, 1.0, 2.0) for k in (2, 8, 64))
        for x in (0.5, 1.0, 2.0):
            for k in (2, 8, 64):
                assert abs(truncated_op(P, p, x, x / k)) <= c_hat * x ** (p - 1.5) * (1 + 1e-12)
    # p = alpha - 1: the eps -> 0 limit read off in the small-eps expansion basis
    eps = 0.5 * 2.0 ** -np.arange(6)
    v = np.array([truncated_op(P, 0.5, 1.0, e) for e in eps])
    basis = np.column_stack([np.ones_like(eps), eps ** 0.5, eps ** 2.5])
    limit = np.linalg.lstsq(basis, v, rcond=None)[0][0]
    assert abs(limit) < 1e-4
    # as eps -> 0 the truncated value approaches the principal value for other p
    full = pv_apply(P, PowerProfile(1.2), 1.0).value
    assert truncated_op(P, 1.2, 1.0, 1e-4) == pytest.approx(full, abs=0.05)
    with pytest.raises(ValueError):
        truncated_op(P, 1.2, 1.0, 0.6)


def energy_monte_carlo(P, u, n=1_000_000, seed=5):
    """E(u, u) = int_{x<y} (u(x)-u(y))^2 J(x, y) by importance sampling in (x, h = y - x)."""
    rng = np.random.default_rng(seed)
    a = P.alpha
    lo, hi = u.support
    x = rng.uniform(0.0, hi, n)
    pick = rng.random(n) < 0.5
    H = hi - lo
    # h density: half  (2-a) h^(1-a) / H^(2-a) on (0, H), half Pareto a H^a h^(-1-a) on (H, inf)
    h = np.where(pick, H * rng.random(n) ** (1 / (2 - a)), H * rng.random(n) ** (-1 / a))
    qh = np.where(h < H, 0.5 * (2 - a) * h ** (1 - a) / H ** (2 - a), 0.5 * a * H ** a * h ** (-1 - a))
    y = x + h
    diff = u.value(y) - u.value(x)
    f = diff * diff * h ** (-1 - a) * model_b_lengths(P, x, y, h)
    w = f / (qh / hi)
    return w.mean(), w.std() / math.sqrt(n)


@pytest.mark.parametrize("beta", [(0.0, 0.0, 0.0, 0.0), (0.5, 0.3, 0.0, 0.0)])
@pytest.mark.parametrize("a", [1.2, 1.5, 1.8])
def test_dirichlet_energy_against_monte_carlo(beta, a):
    P = KernelParams(a, 1, beta)
    u = triangle_bump(1.0, 3.0)
    e = dirichlet_energy(P, u)
    mc, se = energy_monte_carlo(P, u)
    assert e > 0
    assert abs(e - mc) <= 3 * se


def test_dirichlet_energy_basic_identities(plain):
    u = smooth_bump(2.0, 1.0)
    assert dirichlet_energy(plain, ZeroProfile()) == 0.0
    assert dirichlet_energy(plain, u.scaled(2.0)) == pytest.approx(4 * dirichlet_energy(plain, u), rel=1e-6)


def test_hardy(plain):
    u = triangle_bump(1.0, 3.0)
    bound, pstar = hardy_lower_bound(plain)
    assert 0 < pstar < 0.5 and bound > 0
    grid = [-constant_C(plain, p).value for p in (0.1, 0.2, 0.3, 0.4)]
    assert bound >= max(grid) - 1e-12
    near = hardy_ratio(plain, u)
    far = hardy_ratio(plain, triangle_bump(10.0, 12.0))
    assert near >= bound
    assert far > near
    with pytest.raises(EmptyFunction):
        hardy_ratio(plain, ZeroProfile())
    assert weighted_norm(plain, u) > 0
    with pytest.raises(ParameterOutOfRange):
        hardy_ratio(KernelParams(1.0, 1, theta=0.5), u)


def test_non_integrable_profile_rejected(plain):
    from halfspace_jump_lab.profiles import BumpProfile

    grow = BumpProfile(lambda z: z ** 2, lambda z: 2 * z, lambda z: 2 + 0 * z, (0.5, 2.0))
    grow.growth = 2.0
    with pytest.raises(NonIntegrableProfile):
        pv_apply(plain, grow, 1.0)
