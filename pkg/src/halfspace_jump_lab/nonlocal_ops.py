"""Deterministic evaluation of the nonlocal operator on profile functions.

Profiles depend on the boundary coordinate only, so every operator value is
reduced to an integral over ``z = y_d``.  The lateral directions are folded
into a dimensionless factor ``k``:

    int_{|y~| >= cutoff} J(x, (y~, z)) dy~ = |z - x_d|**(-1-alpha) * k(x_d, z)

computed in the angle variable ``|y~| = |h| tan(phi)``.  Where the kernel is
identically 1 the angle integral is an incomplete beta function; the rest
(``B - 1`` on the part of the ray with ``|x - y| > min(x_d, z)``) is done by a
graded Gauss-Legendre rule vectorized over ``z``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import special

from .errors import EmptyFunction, NonIntegrableProfile, ParameterOutOfRange
from .kernel import KernelParams, model_b_lengths, sphere_area, validate
from .profiles import BumpProfile, PowerProfile, Profile
from .quad import (CONSTANT_SPEC, OPERATOR_SPEC, QuadResult, QuadSpec, integrate_1d,
                   integrate_semiinfinite)

HALF_PI = 0.5 * math.pi
_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


class OperatorResult(NamedTuple):
    value: float
    quadrature_error: float
    decomposition: tuple  # (near Taylor-subtracted, kernel correction, far field)

    def to_dict(self) -> dict:
        near, corr, far = self.decomposition
        return {"value": self.value, "error_estimate": self.quadrature_error,
                "decomposition": {"near": near, "correction": corr, "far": far}}


def _check_p(params: KernelParams, p: float, lower_closed: bool = False):
    hi = params.alpha + params.beta1
    ok = (p >= -1 if lower_closed else p > -1) and p < hi
    if not ok or not math.isfinite(p):
        raise ParameterOutOfRange(f"p = {p} outside the admissible range (-1, {hi})")


# ---------------------------------------------------------------------------
# C(alpha, p, B)


def _log_abs_expm1(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x > 0
    out[pos] = x[pos] + np.log(-np.expm1(-x[pos]))
    out[~pos] = np.log(-np.expm1(x[~pos]))
    return out


def _log_b(params: KernelParams, lc1, lc2):
    """log of the normalized kernel from log-ratios (both <= 0)."""
    b1, b2, b3, b4 = params.beta
    out = np.full(np.shape(lc1), math.log(params.normalization))
    if b1:
        out = out + b1 * lc1
    if b2:
        out = out + b2 * lc2
    if b3:
        out = out + b3 * np.log(np.logaddexp(0.0, lc2 - lc1))
    if b4:
        out = out + b4 * np.log(np.logaddexp(0.0, -lc2))
    return out


class _CIntegrand:
    """Integrand of the s-integral on a folded variable w in (0, 2).

    w in (0, 1]:  s = u**m / 2 with u = w      (handles the s -> 0 end)
    w in (1, 2):  1 - s = v**n / 2 with v = 2 - w  (handles s -> 1)
    The exponents make the leading power of the integrand vanish at both ends.
    """

    def __init__(self, params: KernelParams, p: float):
        a = params.alpha
        self.params, self.p, self.q = params, p, a - p - 1.0
        e0 = min(p, 0.0) + min(self.q, 0.0) + params.beta1
        self.m = 1.0 / (1.0 + e0) if e0 < 0 else 1.0
        self.n = 1.0 / (2.0 - a)
        self.sign = -np.sign(p) * np.sign(self.q)
        self.trivial = not any(params.beta)

    def breakpoints(self, rho: float):
        if self.trivial:
            return [1.0]
        pts = [1.0]
        for t in (1.0 / (1.0 + rho), 1.0 / rho):  # c1 = 1 and c2 = 1
            if t <= 0.5:
                pts.append(2.0 - (2.0 * t) ** (1.0 / self.n))
            elif t < 1.0:
                pts.append((2.0 * (1.0 - t)) ** (1.0 / self.m))
        return sorted(set(pts))

    def __call__(self, w, rho: float = 1.0):
        w = np.asarray(w, dtype=float)
        left = w <= 1.0
        ls = np.empty_like(w)
        l1s = np.empty_like(w)
        ljac = np.empty_like(w)
        lu = np.log(w[left])
        ls[left] = -LOG2 + self.m * lu
        l1s[left] = np.log1p(-np.exp(ls[left]))
        ljac[left] = math.log(0.5 * self.m) + (self.m - 1.0) * lu
        lv = np.log(2.0 - w[~left])
        l1s[~left] = -LOG2 + self.n * lv
        ls[~left] = np.log1p(-np.exp(l1s[~left]))
        ljac[~left] = math.log(0.5 * self.n) + (self.n - 1.0) * lv
        a = self.params.alpha
        logv = (_log_abs_expm1(self.p * ls) + _log_abs_expm1(self.q * ls)
                - (1.0 + a) * l1s + ljac)
        if not self.trivial:
            lrho = math.log(rho)
            lc1 = np.minimum(ls - l1s - lrho, 0.0)
            lc2 = np.minimum(-l1s - lrho, 0.0)
            logv = logv + _log_b(self.params, lc1, lc2)
        return self.sign * np.exp(logv)


LOG2 = math.log(2.0)


def _lateral_beta(d: int, alpha: float) -> float:
    """omega_{d-2} * int_0^inf r^(d-2) (1 + r^2)^(-(d+alpha)/2) dr."""
    return sphere_area(d - 2) * 0.5 * special.beta((d - 1) / 2, (alpha + 1) / 2)


def constant_C(params: KernelParams, p: float, spec: QuadSpec | None = None) -> QuadResult:
    """C(alpha, p, B) for the model kernel, as (value, error estimate).

    Exactly zero at p = 0 and p = alpha - 1, where the integrand vanishes
    identically.  For d >= 2 the lateral variable r = |u~| is written as
    tan(phi), so rho = |x - y| / (1 - s) = 1 / cos(phi).
    """
    validate(params)
    spec = spec or CONSTANT_SPEC
    _check_p(params, p)
    if p == 0.0 or p == params.alpha - 1.0:
        return QuadResult(0.0, 0.0)
    g = _CIntegrand(params, p)
    d = params.d
    if d == 1 or g.trivial:
        res = integrate_1d(g, 0.0, 2.0, spec, points=g.breakpoints(1.0))
        if d == 1:
            return res
        lat = _lateral_beta(d, params.alpha)
        return QuadResult(lat * res.value, lat * res.error)

    inner_spec = spec.loosened(0.1)
    omega = sphere_area(d - 2)
    a = params.alpha
    inner_err = [0.0]

    def outer(psi):
        # psi = pi/2 - phi, so cos(phi) = sin(psi)
        out = np.empty_like(psi)
        for i, ps in enumerate(psi):
            rho = 1.0 / math.sin(ps)
            r = integrate_1d(lambda w: g(w, rho), 0.0, 2.0, inner_spec, points=g.breakpoints(rho))
            inner_err[0] = max(inner_err[0], r.error)
            out[i] = omega * math.cos(ps) ** (d - 2) * math.sin(ps) ** a * r.value
        return out

    res = integrate_1d(outer, 0.0, HALF_PI, spec, singular="left")
    return QuadResult(res.value, res.error + inner_err[0] * HALF_PI)


# ---------------------------------------------------------------------------
# lateral reduction


def lateral_factor(params: KernelParams, xd: float, z, psi_hi=HALF_PI, panels: int = 4):
    """Return ``(k_iso, k_excess)`` with ``k = k_iso + k_excess``.

    ``k_iso`` is the lateral integral with B replaced by 1, ``k_excess`` the
    integral of ``B - 1``.  The lateral region is ``|y~| >= |h| cot(psi_hi)``
    (``psi_hi = pi/2`` means no cutoff).  For d = 1 any cutoff below pi/2
    empties the region.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    psi_hi = np.broadcast_to(np.asarray(psi_hi, dtype=float), z.shape)
    h = np.abs(z - xd)
    d, a = params.d, params.alpha
    if d == 1:
        on = psi_hi >= HALF_PI
        b = model_b_lengths(params, xd, z, h)
        return on.astype(float), np.where(on, b - 1.0, 0.0)
    s2 = np.sin(psi_hi) ** 2
    k_iso = _lateral_beta(d, a) * special.betainc((a + 1) / 2, (d - 1) / 2, s2)
    if not any(params.beta):
        return k_iso, np.zeros_like(z)
    lo = np.minimum(xd, z)
    hi = np.maximum(xd, z)
    psi_m = np.arcsin(np.minimum(h / lo, 1.0))
    delta = np.minimum(psi_hi, psi_m)
    psi_kink = np.arcsin(np.minimum(h / hi, 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        w_kink = np.where(psi_kink < delta, np.sqrt(psi_kink / delta), 1.0)
    w_kink = np.nan_to_num(w_kink, nan=1.0)
    # panel edges: graded toward w = 0 on [0, w_kink], uniform on [w_kink, 1]
    k = np.linspace(0.0, 1.0, panels + 1)
    e1 = w_kink[:, None] * (k ** 2)[None, :]
    e2 = w_kink[:, None] + (1.0 - w_kink)[:, None] * k[None, :]
    edges = np.concatenate([e1, e2[:, 1:]], axis=1)
    lo_e, hi_e = edges[:, :-1], edges[:, 1:]
    half = 0.5 * (hi_e - lo_e)
    w = (0.5 * (hi_e + lo_e))[:, :, None] + half[:, :, None] * _GL_X[None, None, :]
    wt = half[:, :, None] * _GL_W[None, None, :]
    psi = delta[:, None, None] * w * w
    sp = np.sin(psi)
    hh = np.where(h > 0, h, 1.0)[:, None, None]
    # inside the numeric range |x - y| >= min(x_d, z), so c1 = lo sin(psi) / h
    c1 = np.minimum(lo[:, None, None] * sp / hh, 1.0)
    c2 = np.minimum(hi[:, None, None] * sp / hh, 1.0)
    from .kernel import btilde_from_ratios

    bm1 = btilde_from_ratios(np.maximum(c1, 1e-300), c2, params.beta) * params.normalization - 1.0
    f = np.cos(psi) ** (d - 2) * sp ** a * bm1 * (2.0 * delta[:, None, None] * w)
    excess = sphere_area(d - 2) * np.sum(f * wt, axis=(1, 2))
    excess = np.where(delta > 0, excess, 0.0)
    return k_iso, excess


def _kfull(params, xd, z, psi_hi=HALF_PI):
    ki, ke = lateral_factor(params, xd, z, psi_hi)
    return ki + ke


# ---------------------------------------------------------------------------
# principal value operator


def _profile_of(f) -> Profile:
    if isinstance(f, Profile):
        return f
    raise TypeError(f"expected a Profile, got {type(f).__name__}")


def _xd_of(x) -> float:
    xd = float(np.atleast_1d(np.asarray(x, dtype=float))[-1])
    if not xd > 0:
        raise ValueError("x must lie in the open half-space")
    return xd


def _far_field(params, prof: Profile, xd: float, spec: QuadSpec, gaps=((0.5, 1.5),)):
    """int over z outside the near zone of (f(z) - f(x)) |h|^(-1-alpha) k(x, z)."""
    a = params.alpha
    fx = float(prof.value(xd))
    total, err = 0.0, 0.0

    def integrand(z, psi_fn=None):
        kk = _kfull(params, xd, z)
        return (prof.value(z) - fx) * np.abs(z - xd) ** (-1.0 - a) * kk

    lo_gap, hi_gap = gaps[0]
    # left piece (0, lo_gap * xd); substitute z = c * u^m to tame z -> 0
    c = lo_gap * xd
    e = min(prof.origin_exponent, 0.0) + params.beta1
    e = min(e, 0.0) if prof.support[0] == 0.0 else 0.0
    m = 1.0 / (1.0 + e)
    pts = [(t / c) ** (1.0 / m) for t in (*prof.support, *prof.breakpoints) if 0 < t < c]

    def left(u):
        z = c * u ** m
        return integrand(z) * c * m * u ** (m - 1.0)

    r = integrate_1d(left, 0.0, 1.0, spec, singular="left", points=pts)
    total += r.value
    err += r.error
    # right piece (hi_gap * xd, inf)
    start = hi_gap * xd
    if prof.growth == -math.inf:
        stop = max(prof.support[1], start)
        if stop > start:
            pts = [t for t in prof.breakpoints if start < t < stop] + \
                  [t for t in prof.support if start < t < stop]
            r = integrate_1d(integrand, start, stop, spec, points=pts)
            total += r.value
            err += r.error
        if fx != 0.0:
            q = 1.0 + a + params.beta1
            r = integrate_semiinfinite(integrand, stop, spec, decay_exponent=q, scale=xd)
            total += r.value
            err += r.error
    else:
        q = 1.0 + a + params.beta1 - prof.growth
        if not q > 1.0:
            raise NonIntegrableProfile(f"profile grows too fast at infinity (growth {prof.growth})")
        r = integrate_semiinfinite(integrand, start, spec, decay_exponent=q, scale=xd)
        total += r.value
        err += r.error
    return total, err


def pv_apply(params: KernelParams, f, x, spec: QuadSpec | None = None) -> OperatorResult:
    """Principal value of int (f(y) - f(x)) J(x, y) dy for a profile f.

    Split into the slab |y_d - x_d| < x_d/2 (Taylor-subtracted part plus the
    odd term against B - 1) and the far field.
    """
    validate(params)
    spec = spec or OPERATOR_SPEC
    prof = _profile_of(f)
    if isinstance(prof, PowerProfile):
        _check_p(params, prof.p)
    elif prof.growth >= params.alpha + params.beta1:
        raise NonIntegrableProfile("profile is not integrable against the kernel at infinity")
    xd = _xd_of(x)
    if prof.is_constant():
        return OperatorResult(0.0, 0.0, (0.0, 0.0, 0.0))
    a = params.alpha
    rho = 0.5 * xd
    m = 1.0 / (2.0 - a)
    near, near_err = 0.0, 0.0
    corr, corr_err = 0.0, 0.0
    slope = float(prof.d1(xd))
    for sgn in (-1.0, 1.0):
        pts = []
        for t in (*prof.breakpoints, *prof.support):
            hv = (t - xd) * sgn
            if 0 < hv < rho:
                pts.append((hv / rho) ** (1.0 / m))

        def near_f(v, sgn=sgn):
            hv = rho * v ** m
            z = xd + sgn * hv
            kk = _kfull(params, xd, z)
            return prof.remainder(xd, sgn * hv) * hv ** (-1.0 - a) * kk * rho * m * v ** (m - 1.0)

        r = integrate_1d(near_f, 0.0, 1.0, spec, points=pts)
        near += r.value
        near_err += r.error
        if params.d >= 2 and any(params.beta) and slope != 0.0:
            def corr_f(v, sgn=sgn):
                hv = rho * v
                _, ke = lateral_factor(params, xd, xd + sgn * hv)
                return sgn * hv ** (-a) * ke * rho

            r = integrate_1d(corr_f, 0.0, 1.0, spec)
            corr += slope * r.value
            corr_err += abs(slope) * r.error
    far, far_err = _far_field(params, prof, xd, spec)
    value = near + corr + far
    return OperatorResult(value, near_err + corr_err + far_err, (near, corr, far))


def pv_apply_truncated(params: KernelParams, p: float, R: float, z, spec: QuadSpec | None = None) -> float:
    """Operator applied to x_d^p 1_{D(R,R)} at a point z of U(R).

    Equals the full power-profile value minus the tail
    int over D(R,R)^c of y_d^p J(z, y) dy.  Off-axis points are supported for
    d <= 2; for d >= 3 the lateral part of z must vanish.
    """
    validate(params)
    spec = spec or OPERATOR_SPEC
    if params.alpha <= 1.0:
        raise ParameterOutOfRange("pv_apply_truncated needs alpha > 1")
    if not (params.alpha - 1.0 <= p < params.alpha + params.beta1):
        raise ParameterOutOfRange(f"p = {p} outside [alpha - 1, alpha + beta1)")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    zd = float(z[-1])
    lat = z[:-1]
    if not (0 < zd < R / 2 and np.sum(lat * lat) < (R / 2) ** 2):
        raise ValueError("z must lie in U(R) = D(R/2, R/2)")
    if params.d >= 3 and np.any(lat != 0):
        raise ValueError("off-axis points are only supported for d <= 2")
    c = float(abs(lat[0])) if params.d == 2 else 0.0
    full = pv_apply(params, PowerProfile(p), zd, spec).value
    a = params.alpha
    q = 1.0 + a + params.beta1 - p

    def upper(y):
        return y ** p * np.abs(y - zd) ** (-1.0 - a) * _kfull(params, zd, y)

    tail = integrate_semiinfinite(upper, R, spec, decay_exponent=q, scale=R).value
    if params.d >= 2:
        def lower(y):
            h = np.abs(y - zd)
            if params.d == 2:
                k = 0.5 * (_kfull(params, zd, y, np.arctan2(h, R - c))
                           + _kfull(params, zd, y, np.arctan2(h, R + c)))
            else:
                k = _kfull(params, zd, y, np.arctan2(h, R))
            return y ** p * np.where(h > 0, h, 1.0) ** (-1.0 - a) * k

        tail += integrate_1d(lower, 0.0, R, spec, points=[zd]).value
    return full - tail


def truncated_op(params: KernelParams, p: float, x, eps: float, spec: QuadSpec | None = None) -> float:
    """int over |y - x| > eps of (y_d^p - x_d^p) J(x, y) dy, with 0 < eps <= x_d/2."""
    validate(params)
    spec = spec or OPERATOR_SPEC
    _check_p(params, p)
    xd = _xd_of(x)
    if not (0 < eps <= 0.5 * xd * (1 + 1e-12)):
        raise ValueError(f"eps must lie in (0, x_d/2], got {eps}")
    if p == 0.0:
        return 0.0
    prof = PowerProfile(p)
    a = params.alpha
    far, _ = _far_field(params, prof, xd, spec)
    fx = xd ** p
    total = far

    def ring(z):
        h = np.abs(z - xd)
        if params.d == 1:
            k = _kfull(params, xd, z)
        else:
            psi = np.where(h < eps, np.arcsin(np.minimum(h / eps, 1.0)), HALF_PI)
            k = _kfull(params, xd, z, psi)
        return (z ** p - fx) * np.where(h > 0, h, 1.0) ** (-1.0 - a) * k

    lo, hi = 0.5 * xd, 1.5 * xd
    if params.d == 1:
        total += integrate_1d(ring, lo, xd - eps, spec).value
        total += integrate_1d(ring, xd + eps, hi, spec).value
    else:
        total += integrate_1d(ring, lo, hi, spec, points=[xd - eps, xd, xd + eps]).value
    return total


# ---------------------------------------------------------------------------
# Dirichlet form and Hardy ratio (d = 1)


def _require_1d(params):
    if params.d != 1:
        raise ValueError("Dirichlet energy is implemented for d = 1 only")


def _b1(params, x, y):
    return model_b_lengths(params, x, y, np.abs(y - x))


def dirichlet_energy(params: KernelParams, u: BumpProfile, spec: QuadSpec | None = None) -> float:
    """Half the double integral of (u(x) - u(y))^2 J(x, y) over the half-line squared.

    By symmetry this is the x < y half, split into: both points in the
    support [a, b]; x in [a, b] with y > b; x < a with y in [a, b].
    """
    validate(params)
    _require_1d(params)
    spec = spec or OPERATOR_SPEC
    al = params.alpha
    lo, hi = u.support
    kinks = [t for t in u.breakpoints if lo < t < hi]
    plain = not any(params.beta)
    m = 1.0 / (2.0 - al)
    inner_spec = spec.loosened(0.1)

    # both in support: x in (lo, hi), h = y - x in (0, hi - x), h = (hi - x) v^m
    def part_a(xs):
        out = np.empty_like(xs)
        for i, x in enumerate(xs):
            span = hi - x
            dx = float(u.d1(x))
            pts = [((t - x) / span) ** (1.0 / m) for t in kinks if t > x]
            if not plain and x < span:
                pts.append((x / span) ** (1.0 / m))

            def g(v):
                h = span * v ** m
                y = x + h
                # Taylor form near h = 0, where u(y) - u(x) is pure cancellation
                diff = dx * h + u.remainder(x, h)
                return diff * diff * h ** (-1.0 - al) * _b1(params, x, y) * span * m * v ** (m - 1.0)

            out[i] = integrate_1d(g, 0.0, 1.0, inner_spec, points=pts).value
        return out

    # x in (lo, hi), y beyond hi; y - x = (hi - x) e^t
    def right_mass(x):
        span = hi - x
        if plain:
            return span ** (-al) / al
        g = lambda t: np.exp(-al * t) * _b1(params, x, x + span * np.exp(t))  # noqa: E731
        return span ** (-al) * integrate_semiinfinite(g, 0.0, inner_spec, decay_exponent=3.0).value

    # y in (lo, hi), x below lo; y - x = (y - lo) e^t, t up to log(y / (y - lo))
    def left_mass(y):
        span = y - lo
        if plain:
            return (span ** (-al) - y ** (-al)) / al
        top = math.log(y / span)
        g = lambda t: np.exp(-al * t) * _b1(params, y - span * np.exp(t), y)  # noqa: E731
        pts = [math.log(0.5 * y / span)] if 0.5 * y > span else []
        return span ** (-al) * integrate_1d(g, 0.0, top, inner_spec, points=pts).value

    def part_bc(xs):
        vals = u.value(xs) ** 2
        out = np.zeros_like(xs)
        for i, x in enumerate(xs):
            if vals[i] != 0.0:
                out[i] = vals[i] * (right_mass(x) + left_mass(x))
        return out

    ea = integrate_1d(part_a, lo, hi, spec, points=kinks).value
    ebc = integrate_1d(part_bc, lo, hi, spec, points=kinks).value
    return ea + ebc


def weighted_norm(params: KernelParams, u: BumpProfile, spec: QuadSpec | None = None) -> float:
    """int u(x)^2 x^(-alpha) dx."""
    spec = spec or OPERATOR_SPEC
    lo, hi = u.support
    g = lambda x: u.value(x) ** 2 * x ** (-params.alpha)  # noqa: E731
    return integrate_1d(g, lo, hi, spec, points=[t for t in u.breakpoints if lo < t < hi]).value


def hardy_ratio(params: KernelParams, u: BumpProfile, spec: QuadSpec | None = None) -> float:
    validate(params)
    _require_1d(params)
    if params.alpha == 1.0:
        raise ParameterOutOfRange("the Hardy ratio check needs alpha != 1")
    norm = weighted_norm(params, u, spec)
    if norm <= 0.0:
        raise EmptyFunction("profile vanishes identically")
    return dirichlet_energy(params, u, spec) / norm


def hardy_lower_bound(params: KernelParams, n_grid: int = 16, spec: QuadSpec | None = None) -> tuple[float, float]:
    """max of -C(alpha, p) over n_grid equispaced p in (0, alpha - 1) (or (alpha - 1, 0)).

    Returns (bound, argmax p).
    """
    a1 = params.alpha - 1.0
    ps = a1 * np.arange(1, n_grid + 1) / (n_grid + 1)
    vals = [-constant_C(params, float(p), spec).value for p in ps]
    i = int(np.argmax(vals))
    return float(vals[i]), float(ps[i])
