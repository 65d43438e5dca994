"""Boundary function B(x, y), jump kernel J(x, y) and half-space domains.

The model boundary function depends on a pair of points only through the
three lengths ``x_d``, ``y_d`` and ``|x - y|``, or equivalently through the
two clipped ratios

    c1 = min((x_d ^ y_d) / |x - y|, 1),   c2 = min((x_d v y_d) / |x - y|, 1),

with ``0 < c1 <= c2 <= 1``.  In these variables

    Btilde = c1**b1 * c2**b2 * log(1 + c2/c1)**b3 * log(1 + 1/c2)**b4

and the normalized kernel used everywhere in the package is
``Btilde / log(2)**(b3 + b4)``.  Whenever ``|x - y| <= min(x_d, y_d)`` both
ratios clip to 1 and the normalized kernel is exactly 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import CoincidentPoints, ConstraintViolation, EnvelopeSearchFailure

LOG2 = math.log(2.0)
ENVELOPE_SAFETY = 1.05


@dataclass(frozen=True)
class KernelParams:
    alpha: float
    d: int
    beta: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    theta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def beta1(self) -> float:
        return self.beta[0]

    @property
    def beta2(self) -> float:
        return self.beta[1]

    @property
    def beta3(self) -> float:
        return self.beta[2]

    @property
    def beta4(self) -> float:
        return self.beta[3]

    @property
    def normalization(self) -> float:
        """Factor turning Btilde into a kernel equal to 1 on the diagonal."""
        return LOG2 ** -(self.beta3 + self.beta4)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "d": self.d, "beta": list(self.beta), "theta": self.theta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "KernelParams":
        try:
            beta = obj.get("beta", [0.0, 0.0, 0.0, 0.0])
            if len(beta) != 4:
                raise ConstraintViolation("beta must have exactly four entries")
            params = cls(alpha=obj["alpha"], d=int(obj["d"]), beta=tuple(beta),
                         theta=float(obj.get("theta", 1.0)))
        except KeyError as exc:
            raise ConstraintViolation(f"missing kernel field {exc.args[0]!r}") from None
        return validate(params)

    @classmethod
    def from_json(cls, text: str) -> "KernelParams":
        return cls.from_dict(json.loads(text))


def validate(params: KernelParams) -> KernelParams:
    """Return ``params`` unchanged if every invariant holds."""
    a = params.alpha
    if not (0.0 < a < 2.0) or not math.isfinite(a):
        raise ConstraintViolation(f"alpha must lie in (0, 2), got {a}")
    if int(params.d) != params.d or params.d < 1:
        raise ConstraintViolation(f"d must be an integer >= 1, got {params.d}")
    b1, b2, b3, b4 = params.beta
    if min(params.beta) < 0 or not all(math.isfinite(b) for b in params.beta):
        raise ConstraintViolation(f"beta entries must be finite and nonnegative, got {params.beta}")
    if b3 > 0 and b1 <= 0:
        raise ConstraintViolation("beta1 > 0 required when beta3 > 0")
    if b4 > 0 and b2 <= 0:
        raise ConstraintViolation("beta2 > 0 required when beta4 > 0")
    if not params.theta > 0:
        raise ConstraintViolation(f"theta must be positive, got {params.theta}")
    if a >= 1 and not params.theta > a - 1:
        raise ConstraintViolation(f"theta must exceed alpha - 1 = {a - 1} when alpha >= 1")
    return params


def btilde_from_ratios(c1, c2, beta) -> np.ndarray:
    """Un-normalized Btilde as a function of the clipped ratios (vectorized)."""
    b1, b2, b3, b4 = beta
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    out = np.ones(np.broadcast(c1, c2).shape)
    if b1:
        out = out * c1 ** b1
    if b2:
        out = out * c2 ** b2
    if b3:
        out = out * np.log1p(c2 / c1) ** b3
    if b4:
        out = out * np.log1p(1.0 / c2) ** b4
    return out


def model_b_lengths(params: KernelParams, xd, yd, dist) -> np.ndarray:
    """Normalized kernel from (x_d, y_d, |x - y|); equals 1 where dist == 0."""
    xd = np.asarray(xd, dtype=float)
    yd = np.asarray(yd, dtype=float)
    dist = np.asarray(dist, dtype=float)
    lo = np.minimum(xd, yd)
    hi = np.maximum(xd, yd)
    safe = np.where(dist > 0, dist, 1.0)
    c1 = np.where(dist > 0, np.minimum(lo / safe, 1.0), 1.0)
    c2 = np.where(dist > 0, np.minimum(hi / safe, 1.0), 1.0)
    val = btilde_from_ratios(c1, c2, params.beta) * params.normalization
    # both ratios clip to 1 here, and the normalized kernel is exactly 1
    return np.where(dist <= lo, 1.0, val)


def _pair(x, y):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError("points must have the same dimension")
    if x[-1] <= 0 or y[-1] <= 0:
        raise ValueError("points must lie in the open half-space (last coordinate > 0)")
    return x, y


def btilde(params: KernelParams, x, y) -> float:
    x, y = _pair(x, y)
    dist = float(np.linalg.norm(x - y))
    if dist == 0.0:
        raise CoincidentPoints("Btilde is undefined at x == y; use model_B")
    lo, hi = min(x[-1], y[-1]), max(x[-1], y[-1])
    return float(btilde_from_ratios(min(lo / dist, 1.0), min(hi / dist, 1.0), params.beta))


def model_B(params: KernelParams, x, y) -> float:
    x, y = _pair(x, y)
    dist = float(np.linalg.norm(x - y))
    return float(model_b_lengths(params, x[-1], y[-1], dist))


def jump_kernel(params: KernelParams, x, y) -> float:
    x, y = _pair(x, y)
    dist = float(np.linalg.norm(x - y))
    if dist == 0.0:
        raise CoincidentPoints("J(x, x) is infinite")
    return dist ** (-params.d - params.alpha) * float(model_b_lengths(params, x[-1], y[-1], dist))


def _log_b_normalized(ab, beta, norm_log):
    # a = -log c2 >= 0, b = log c2 - log c1 >= 0
    a, b = ab
    b1, b2, b3, b4 = beta
    val = -b1 * (a + b) - b2 * a + norm_log
    if b3:
        val += b3 * math.log(float(np.logaddexp(0.0, b)))
    if b4:
        val += b4 * math.log(float(np.logaddexp(0.0, a)))
    return val


def kernel_envelope(params: KernelParams, safety: float = ENVELOPE_SAFETY) -> float:
    """Upper bound M_B for the normalized kernel, with a multiplicative safety factor.

    The maximization runs over the ratio variables written as
    ``c2 = exp(-a)``, ``c1 = c2 * exp(-b)`` with ``a, b >= 0``.
    """
    validate(params)
    beta = params.beta
    if not any(beta):
        return safety
    norm_log = math.log(params.normalization)
    grid = np.concatenate([np.linspace(0.0, 2.0, 41), np.geomspace(2.05, 1e5, 160)])
    best, best_ab = -math.inf, (0.0, 0.0)
    for a in grid:
        for b in grid:
            v = _log_b_normalized((a, b), beta, norm_log)
            if v > best:
                best, best_ab = v, (a, b)
    res = optimize.minimize(lambda ab: -_log_b_normalized(ab, beta, norm_log), best_ab,
                            method="L-BFGS-B", bounds=[(0.0, 1e6), (0.0, 1e6)])
    if not res.success and not np.isfinite(res.fun):
        raise EnvelopeSearchFailure(f"envelope maximization failed: {res.message}")
    top = max(best, -float(res.fun), 0.0)  # diagonal value is exactly 1
    if any(ab > 0.99e6 for ab in res.x):
        further = _log_b_normalized(np.asarray(res.x) * 2.0, beta, norm_log)
        if further > -float(res.fun) + 1e-12:
            raise EnvelopeSearchFailure("envelope maximizer ran to the search boundary")
    return safety * math.exp(top)


@dataclass(frozen=True)
class BoxDomain:
    """Exit domains in the half-space.

    ``kind`` is one of ``"box"`` (D_w(a, b)), ``"ball"`` (B(c, r) intersected
    with the half-space) or ``"halfspace"``.  The strip U(r) is the box
    D_0(r/2, r/2), built by :meth:`strip`.
    """

    kind: str
    d: int
    center: tuple = field(default=())
    a: float = 0.0
    b: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        if self.kind not in ("box", "ball", "halfspace"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.kind == "box":
            if not (self.a > 0 and self.b > 0):
                raise ValueError("box widths must be positive")
            if len(self.center) != self.d - 1:
                raise ValueError("box center must have d - 1 lateral coordinates")
        if self.kind == "ball":
            if not self.r > 0:
                raise ValueError("ball radius must be positive")
            if len(self.center) != self.d:
                raise ValueError("ball center must have d coordinates")

    @classmethod
    def box(cls, d, a, b, w=None):
        return cls("box", d, tuple(w) if w is not None else (0.0,) * (d - 1), a=a, b=b)

    @classmethod
    def strip(cls, d, r):
        return cls.box(d, r / 2, r / 2)

    @classmethod
    def ball(cls, center, r):
        center = tuple(center)
        return cls("ball", len(center), center, r=r)

    @classmethod
    def halfspace(cls, d):
        return cls("halfspace", d)

    def contains(self, x) -> np.ndarray | bool:
        """Membership of points (last axis = coordinates); exact comparisons."""
        x = np.asarray(x, dtype=float)
        xd = x[..., -1]
        if self.kind == "halfspace":
            return xd > 0
        if self.kind == "box":
            lat = x[..., :-1] - np.asarray(self.center)
            return (np.sum(lat * lat, axis=-1) < self.a * self.a) & (xd > 0) & (xd < self.b)
        diff = x - np.asarray(self.center)
        return (np.sum(diff * diff, axis=-1) < self.r * self.r) & (xd > 0)

    def scaled(self, s: float) -> "BoxDomain":
        c = tuple(s * v for v in self.center)
        return BoxDomain(self.kind, self.d, c, a=self.a * s, b=self.b * s, r=self.r * s)

    def volume(self) -> float:
        d = self.d
        if self.kind == "halfspace":
            return math.inf
        if self.kind == "box":
            return unit_ball_volume(d - 1) * self.a ** (d - 1) * self.b
        return ball_volume_in_halfspace(d, self.r, self.center[-1])

    def encode(self) -> tuple:
        """Flat numeric description consumed by the simulation kernel."""
        code = {"halfspace": 0, "box": 1, "ball": 2}[self.kind]
        center = np.zeros(self.d)
        if self.kind == "box":
            center[:-1] = self.center
        elif self.kind == "ball":
            center[:] = self.center
        return code, center, float(self.a), float(self.b), float(self.r)


def sphere_area(k: int) -> float:
    """Surface measure of the unit sphere S^k in R^(k+1); S^0 has two points."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


def unit_ball_volume(k: int) -> float:
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


def ball_volume_in_halfspace(d: int, rho: float, height: float) -> float:
    """Volume of B(c, rho) intersected with {x_d > 0} for a center at the given height."""
    if height >= rho:
        return unit_ball_volume(d) * rho ** d
    if height <= -rho:
        return 0.0
    # cross-sections are (d-1)-balls of radius sqrt(rho^2 - t^2)
    from scipy import integrate

    vk = unit_ball_volume(d - 1)
    val, _ = integrate.quad(lambda t: vk * (rho * rho - t * t) ** ((d - 1) / 2), -height, rho)
    return val
