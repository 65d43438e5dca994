"""Functions of the boundary coordinate x_d only.

Every profile exposes vectorized ``value``, ``d1`` and ``d2`` (derivatives in
x_d) plus ``remainder(xd, h) = f(xd + h) - f(xd) - f'(xd) h``, evaluated
without catastrophic cancellation for small ``h``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ParameterOutOfRange


class Profile:
    growth = 0.0  # f(z) = O(z**growth) as z -> inf
    origin_exponent = 0.0  # f(z) = O(z**origin_exponent) as z -> 0
    support: tuple[float, float] = (0.0, math.inf)
    breakpoints: tuple = ()

    def value(self, z):
        raise NotImplementedError

    def d1(self, z):
        raise NotImplementedError

    def d2(self, z):
        raise NotImplementedError

    def remainder(self, xd, h):
        h = np.asarray(h, dtype=float)
        direct = self.value(xd + h) - self.value(xd) - self.d1(xd) * h
        small = np.abs(h) < 1e-5 * max(xd, 1e-300)
        return np.where(small, 0.5 * self.d2(xd) * h * h, direct)

    def is_constant(self) -> bool:
        return False


class PowerProfile(Profile):
    """g_p(x) = x_d**p."""

    def __init__(self, p: float):
        if not p > -1:
            raise ParameterOutOfRange(f"power profile needs p > -1, got {p}")
        self.p = float(p)
        self.growth = max(self.p, 0.0)
        self.origin_exponent = min(self.p, 0.0)

    def value(self, z):
        return np.asarray(z, dtype=float) ** self.p

    def d1(self, z):
        return self.p * np.asarray(z, dtype=float) ** (self.p - 1)

    def d2(self, z):
        return self.p * (self.p - 1) * np.asarray(z, dtype=float) ** (self.p - 2)

    def remainder(self, xd, h):
        p = self.p
        v = np.asarray(h, dtype=float) / xd
        with np.errstate(invalid="ignore"):
            direct = np.expm1(p * np.log1p(v)) - p * v
        # (1+v)^p - 1 - p v as a series where the direct form cancels
        c2 = p * (p - 1) / 2
        c3 = c2 * (p - 2) / 3
        c4 = c3 * (p - 3) / 4
        c5 = c4 * (p - 4) / 5
        c6 = c5 * (p - 5) / 6
        series = v * v * (c2 + v * (c3 + v * (c4 + v * (c5 + v * c6))))
        out = np.where(np.abs(v) < 2e-3, series, direct)
        return xd ** p * out

    def is_constant(self):
        return self.p == 0.0

    def __repr__(self):
        return f"PowerProfile(p={self.p})"


class ConstantProfile(Profile):
    def __init__(self, c: float = 1.0):
        self.c = float(c)

    def value(self, z):
        return np.full(np.shape(z), self.c)

    def d1(self, z):
        return np.zeros(np.shape(z))

    def d2(self, z):
        return np.zeros(np.shape(z))

    def remainder(self, xd, h):
        return np.zeros(np.shape(h))

    def is_constant(self):
        return True


class BumpProfile(Profile):
    """Compactly supported profile given by closures for f, f', f''."""

    growth = -math.inf

    def __init__(self, value, d1, d2, support, breakpoints=()):
        lo, hi = support
        if not (0 < lo < hi < math.inf):
            raise ParameterOutOfRange(f"bump support must lie strictly inside (0, inf), got {support}")
        self._f, self._d1, self._d2 = value, d1, d2
        self.support = (float(lo), float(hi))
        self.breakpoints = tuple(breakpoints)

    def value(self, z):
        z = np.asarray(z, dtype=float)
        lo, hi = self.support
        inside = (z > lo) & (z < hi)
        return np.where(inside, self._f(np.clip(z, lo, hi)), 0.0)

    def d1(self, z):
        z = np.asarray(z, dtype=float)
        lo, hi = self.support
        return np.where((z > lo) & (z < hi), self._d1(np.clip(z, lo, hi)), 0.0)

    def d2(self, z):
        z = np.asarray(z, dtype=float)
        lo, hi = self.support
        return np.where((z > lo) & (z < hi), self._d2(np.clip(z, lo, hi)), 0.0)

    def scaled(self, factor: float) -> "BumpProfile":
        f, g, h = self._f, self._d1, self._d2
        return BumpProfile(lambda z: factor * f(z), lambda z: factor * g(z),
                           lambda z: factor * h(z), self.support, self.breakpoints)


def smooth_bump(center: float, half_width: float, amplitude: float = 1.0) -> BumpProfile:
    """amplitude * (1 - t^2)^3 with t = (z - center) / half_width; C^2 with compact support."""
    c, w, A = float(center), float(half_width), float(amplitude)

    def f(z):
        t = (z - c) / w
        return A * (1 - t * t) ** 3

    def d1(z):
        t = (z - c) / w
        return A * (-6 * t) * (1 - t * t) ** 2 / w

    def d2(z):
        t = (z - c) / w
        return A * (-6 * (1 - t * t) ** 2 + 24 * t * t * (1 - t * t)) / (w * w)

    return BumpProfile(f, d1, d2, (c - w, c + w))


def triangle_bump(lo: float, hi: float, height: float = 1.0) -> BumpProfile:
    """Lipschitz tent on [lo, hi] peaking at the midpoint (no second derivative)."""
    mid = 0.5 * (lo + hi)
    slope = height / (mid - lo)

    def f(z):
        return height - slope * np.abs(z - mid)

    def d1(z):
        return -slope * np.sign(z - mid)

    def d2(z):
        return np.zeros(np.shape(z))

    return BumpProfile(f, d1, d2, (lo, hi), breakpoints=(mid,))


class ZeroProfile(BumpProfile):
    def __init__(self, support=(1.0, 2.0)):
        zero = lambda z: np.zeros(np.shape(z))  # noqa: E731
        super().__init__(zero, zero, zero, support)
