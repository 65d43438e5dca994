"""Adaptive Gauss-Kronrod quadrature with graded meshes.

All integrands are vectorized: ``f`` receives a 1-D float array of nodes and
returns an array of the same shape.  Endpoint singularities are handled by a
graded initial mesh plus adaptive bisection; integrable singularities that are
close to non-integrable should be removed by a change of variables before
calling in (see :mod:`halfspace_jump_lab.nonlocal_ops`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ToleranceNotMet

# Kronrod 15-point extension of the 7-point Gauss rule (QUADPACK qk15 constants).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes in (-1, 1), ascending
KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_W = np.zeros(15)
GAUSS_W[[1, 3, 5]] = _WG[:3]
GAUSS_W[7] = _WG[3]
GAUSS_W[[9, 11, 13]] = _WG[2::-1]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 4000
    grading_exponent: float = 1.0
    initial_panels: int = 4

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.grading_exponent < 1:
            raise ValueError("grading_exponent must be >= 1")

    def loosened(self, factor: float) -> "QuadSpec":
        return replace(self, abs_tol=self.abs_tol * factor, rel_tol=self.rel_tol * factor)


CONSTANT_SPEC = QuadSpec(abs_tol=1e-10, rel_tol=1e-8)
OPERATOR_SPEC = QuadSpec(abs_tol=1e-8, rel_tol=1e-6)


class QuadResult(NamedTuple):
    value: float
    error: float


def graded_breakpoints(a: float, b: float, n: int, g: float, singular: str | None) -> np.ndarray:
    """Mesh t_k = (k/n)**g mapped onto [a, b], clustered toward singular end(s)."""
    k = np.linspace(0.0, 1.0, n + 1)
    if singular is None or g == 1.0:
        t = k
    elif singular == "left":
        t = k ** g
    elif singular == "right":
        t = 1.0 - (1.0 - k) ** g
    elif singular == "both":
        t = np.where(k <= 0.5, 0.5 * (2 * k) ** g, 1.0 - 0.5 * (2 * (1 - k)) ** g)
    else:
        raise ValueError(f"singular must be None, 'left', 'right' or 'both', got {singular!r}")
    return a + (b - a) * t


def _gk_panels(f, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * NODES[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(fx)):
        bad = x[~np.isfinite(fx)][:3]
        raise FloatingPointError(f"integrand is not finite at nodes {bad}")
    k = half * (fx @ KRONROD_W)
    g = half * (fx @ GAUSS_W)
    resabs = np.abs(half) * (np.abs(fx) @ KRONROD_W)
    return k, np.abs(k - g), resabs


def integrate_1d(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                 spec: QuadSpec | None = None, singular: str | None = None,
                 points: Sequence[float] = ()) -> QuadResult:
    """Globally adaptive Gauss-Kronrod integration of ``f`` over [a, b].

    ``points`` are interior breakpoints (kinks, known discontinuities).  The
    tolerance target is ``max(abs_tol, rel_tol * |value|)``, floored at the
    round-off level ``100 * eps * int |f|``.
    """
    spec = spec or QuadSpec()
    if a == b:
        return QuadResult(0.0, 0.0)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
        singular = {"left": "right", "right": "left"}.get(singular, singular)
    inner = sorted(p for p in points if a < p < b)
    edges = [a, *inner, b]
    meshes = []
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        seg_sing = None
        if singular in ("left", "both") and i == 0:
            seg_sing = "left"
        if singular in ("right", "both") and i == len(edges) - 2:
            seg_sing = "both" if seg_sing == "left" else "right"
        meshes.append(graded_breakpoints(lo, hi, spec.initial_panels, spec.grading_exponent, seg_sing))
    mesh = np.unique(np.concatenate(meshes))
    lo, hi = mesh[:-1], mesh[1:]
    val, err, resabs = _gk_panels(f, lo, hi)
    while True:
        total = float(np.sum(val))
        total_err = float(np.sum(err))
        floor = 100.0 * _EPS * float(np.sum(resabs))
        tol = max(spec.abs_tol, spec.rel_tol * abs(total), floor)
        if total_err <= tol:
            return QuadResult(sign * total, total_err)
        n = lo.size
        width = hi - lo
        splittable = width > 64 * _EPS * np.maximum(np.abs(lo), np.abs(hi))
        if n >= spec.max_subdivisions or not np.any(splittable & (err > 0)):
            raise ToleranceNotMet(
                f"adaptive quadrature stopped at {n} panels with error {total_err:.3e} > {tol:.3e}",
                value=sign * total, error=total_err)
        mark = splittable & (err > tol / n)
        if not np.any(mark):
            mark = np.zeros(n, dtype=bool)
            mark[np.argmax(np.where(splittable, err, -1.0))] = True
        budget = spec.max_subdivisions - n
        if np.count_nonzero(mark) > budget:
            idx = np.argsort(np.where(mark, err, -1.0))[::-1][:max(budget, 1)]
            mark = np.zeros(n, dtype=bool)
            mark[idx] = True
        mid = 0.5 * (lo[mark] + hi[mark])
        new_lo = np.concatenate([lo[mark], mid])
        new_hi = np.concatenate([mid, hi[mark]])
        nv, ne, nr = _gk_panels(f, new_lo, new_hi)
        keep = ~mark
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], ne])
        resabs = np.concatenate([resabs[keep], nr])


def integrate_semiinfinite(f: Callable[[np.ndarray], np.ndarray], a: float,
                           spec: QuadSpec | None = None, decay_exponent: float = 2.0,
                           scale: float = 1.0) -> QuadResult:
    """Integrate ``f`` over (a, inf) for ``|f(r)| <= C r**(-q)``, ``q > 1``.

    Uses ``r = a + scale * ((1 - t)**(-m) - 1)`` on t in (0, 1); with m = 1 and
    scale = 1 this is ``r = a + t / (1 - t)``.  For slow decay (q < 2) the
    exponent m = 1 / (q - 1) removes the algebraic singularity at t = 1.
    """
    q = float(decay_exponent)
    if not q > 1:
        raise ValueError(f"decay exponent must exceed 1, got {q}")
    m = 1.0 if q >= 2 else min(1.0 / (q - 1.0), 50.0)

    def mapped(t):
        one_minus = 1.0 - t
        r = a + scale * (one_minus ** -m - 1.0)
        jac = scale * m * one_minus ** (-m - 1.0)
        with np.errstate(over="ignore", invalid="ignore"):
            out = f(r) * jac
        return np.where(np.isfinite(out), out, 0.0)

    sing = "right" if q < 2 + 1e-12 else None
    return integrate_1d(mapped, 0.0, 1.0, spec, singular=sing)


@dataclass(frozen=True)
class Interval:
    """One axis of a product domain; ``b = inf`` marks a semi-infinite range."""

    a: float
    b: float = math.inf
    singular: str | None = None
    points: tuple = ()
    decay: float = 2.0

    def integrate(self, f, spec: QuadSpec) -> QuadResult:
        if math.isinf(self.b):
            return integrate_semiinfinite(f, self.a, spec, decay_exponent=self.decay)
        return integrate_1d(f, self.a, self.b, spec, singular=self.singular, points=self.points)


def integrate_2d(f: Callable[[float, np.ndarray], np.ndarray], outer: Interval,
                 inner: Interval | Callable[[float], Interval],
                 spec: QuadSpec | None = None) -> QuadResult:
    """Iterated integral  int_outer dx int_inner(x) dy f(x, y).

    ``f(x, y)`` takes a scalar x and a node array y.  The inner tolerance is a
    tenth of the outer one; inner error estimates are accumulated into the
    returned error.
    """
    spec = spec or QuadSpec()
    inner_spec = spec.loosened(0.1)
    inner_err = [0.0]

    def outer_f(xs):
        out = np.empty_like(xs)
        for i, x in enumerate(xs):
            iv = inner(x) if callable(inner) else inner
            res = iv.integrate(lambda y, x=x: f(x, y), inner_spec)
            out[i] = res.value
            inner_err[0] = max(inner_err[0], res.error)
        return out

    res = outer.integrate(outer_f, spec)
    # crude bound on the propagated inner error: largest inner error times outer length
    span = (outer.b - outer.a) if math.isfinite(outer.b) else 1.0
    return QuadResult(res.value, res.error + inner_err[0] * span)
