"""Estimators built on the simulator: harmonicity, exit times, boundary Harnack
and Carleson ratios, Green function values, occupation integrals, lifetime.

All two-sided checks are reported as ratio statements (``RatioReport``) because
the comparison constants involved are not explicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .errors import DegenerateSample, DivergentIntegrand, ParameterOutOfRange
from .kernel import BoxDomain, KernelParams, ball_volume_in_halfspace, validate
from .nonlocal_ops import truncated_op
from .sim import (ABSORBED, EstimateWithCI, Probes, SimConfig, estimate_batch,
                  estimate_from_samples, simulate, terminal_value)


@dataclass
class RatioReport:
    grid: list
    values: np.ndarray
    std_errors: np.ndarray
    label: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.std_errors = np.asarray(self.std_errors, dtype=float)

    @property
    def ci_lo(self):
        return self.values - 1.96 * self.std_errors

    @property
    def ci_hi(self):
        return self.values + 1.96 * self.std_errors

    @property
    def sup_inf_ratio(self) -> float:
        lo = float(np.min(self.values))
        return float(np.max(self.values)) / lo if lo > 0 else math.inf

    @property
    def optimistic_ratio(self) -> float:
        """max of lower CI ends over min of upper CI ends (never below 1)."""
        return max(1.0, float(np.max(self.ci_lo) / np.min(self.ci_hi)))

    @property
    def pessimistic_ratio(self) -> float:
        lo = float(np.min(self.ci_lo))
        return float(np.max(self.ci_hi)) / lo if lo > 0 else math.inf

    def budget_status(self, budget: float) -> str:
        """pass / fail / inconclusive for the statement sup/inf <= budget."""
        if self.pessimistic_ratio <= budget:
            return "pass"
        if self.optimistic_ratio > budget:
            return "fail"
        return "inconclusive"

    def contains(self, target: float, slack: float = 0.0) -> np.ndarray:
        """Per point: does [lo - slack, hi + slack] contain target."""
        return (self.ci_lo - slack <= target) & (target <= self.ci_hi + slack)

    def rows(self) -> list[dict]:
        out = []
        for g, v, s, lo, hi in zip(self.grid, self.values, self.std_errors, self.ci_lo, self.ci_hi):
            out.append({"point": g, "estimate": float(v), "std_error": float(s),
                        "ci_lo": float(lo), "ci_hi": float(hi)})
        return out

    def to_dict(self) -> dict:
        return {"label": self.label, "rows": self.rows(), "sup_inf_ratio": self.sup_inf_ratio,
                "optimistic_ratio": self.optimistic_ratio,
                "pessimistic_ratio": self.pessimistic_ratio, **self.extra}


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r_squared": self.r_squared,
                "slope_stderr": self.slope_stderr}


def fit_exponent(x, y) -> ExponentFit:
    """Least-squares fit of log y = intercept + slope * log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 4:
        raise ValueError("an exponent fit needs at least 4 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DegenerateSample("log-log fit needs positive values")
    res = stats.linregress(np.log(x), np.log(y))
    return ExponentFit(float(res.slope), float(res.intercept), float(res.rvalue ** 2),
                       float(res.stderr))


def _ratio(num: EstimateWithCI, den: EstimateWithCI, factor: float = 1.0):
    """num / (factor * den) with a delta-method standard error (independent samples)."""
    if den.mean <= 0:
        raise DegenerateSample("denominator estimate is not positive")
    q = num.mean / (factor * den.mean)
    rel = math.hypot(num.std_error / num.mean if num.mean else math.inf, den.std_error / den.mean)
    return q, abs(q) * rel


def _axis_point(d: int, xd: float, lateral=None) -> np.ndarray:
    x = np.zeros(d)
    if lateral is not None:
        x[:-1] = lateral
    x[-1] = xd
    return x


def _require_transient_range(params: KernelParams):
    if not (1.0 < params.alpha < 2.0):
        raise ParameterOutOfRange("this estimator is only meaningful for alpha in (1, 2)")


# ---------------------------------------------------------------------------
# harmonicity and exit times


def harmonicity_defect(params: KernelParams, config: SimConfig, x_grid, r: float = 1.0,
                       n_paths: int = 100_000, threads: int = 1) -> RatioReport:
    """E_x[g(Y_tau)] / g(x) for g = x_d^(alpha-1) and tau the exit time of U(r)."""
    validate(params)
    _require_transient_range(params)
    p = params.alpha - 1.0
    U = BoxDomain.strip(params.d, r)
    cfg = config.with_(eta_abs=config.eta_abs * r)
    g = terminal_value(lambda pos: pos[:, -1] ** p)
    vals, ses, grid = [], [], []
    for k, xd in enumerate(x_grid):
        x = _axis_point(params.d, xd)
        batch = simulate(params, cfg, x, U, n_paths, threads=threads, start_index=k * n_paths)
        e = estimate_batch(batch, g)
        vals.append(e.mean / xd ** p)
        ses.append(e.std_error / xd ** p)
        grid.append(float(xd))
    return RatioReport(grid, vals, ses, label="harmonicity E[g(Y_tau)]/g(x)")


def exit_time_scaling_check(params: KernelParams, config: SimConfig, x0, V: BoxDomain, r_list,
                            n_paths: int = 100_000, threads: int = 1) -> RatioReport:
    """E_{r x0}[tau_{rV}] / (r^alpha E_{x0}[tau_V]) for each r (independent path sets)."""
    validate(params)
    x0 = np.asarray(x0, dtype=float)
    base_batch = simulate(params, config, x0, V, n_paths, threads=threads, start_index=0)
    base = estimate_batch(base_batch, "exit_time")
    vals, ses = [], []
    for k, r in enumerate(r_list):
        if r == 1.0:
            vals.append(1.0)
            ses.append(0.0)
            continue
        cfg = config.with_(eta_abs=config.eta_abs * r)
        b = simulate(params, cfg, x0 * r, V.scaled(r), n_paths, threads=threads,
                     start_index=(k + 1) * n_paths)
        q, se = _ratio(estimate_batch(b, "exit_time"), base, r ** params.alpha)
        vals.append(q)
        ses.append(se)
    return RatioReport([float(r) for r in r_list], vals, ses, label="exit-time scaling",
                       extra={"base_mean_exit_time": base.mean})


def exit_time_ks(params: KernelParams, config: SimConfig, x0, V: BoxDomain, r: float,
                 n_paths: int = 20_000, threads: int = 1):
    """Two-sample KS test: r^alpha * tau_V from x0 against tau_{rV} from r x0.

    The two samples use disjoint path streams.  Returns scipy's KS result.
    """
    x0 = np.asarray(x0, dtype=float)
    a = simulate(params, config, x0, V, n_paths, threads=threads, start_index=0)
    cfg = config.with_(eta_abs=config.eta_abs * r)
    b = simulate(params, cfg, x0 * r, V.scaled(r), n_paths, threads=threads, start_index=n_paths)
    ta = a.exit_time[a.completed()] * r ** params.alpha
    tb = b.exit_time[b.completed()]
    return stats.ks_2samp(ta, tb)


def exit_time_decay(params: KernelParams, config: SimConfig, x_grid, r: float = 1.0,
                    n_paths: int = 100_000, threads: int = 1) -> RatioReport:
    """E_x[tau_U(r)] / x_d^(alpha-1) along the axis."""
    validate(params)
    U = BoxDomain.strip(params.d, r)
    cfg = config.with_(eta_abs=config.eta_abs * r)
    p = params.alpha - 1.0
    vals, ses = [], []
    for k, xd in enumerate(x_grid):
        b = simulate(params, cfg, _axis_point(params.d, xd), U, n_paths, threads=threads,
                     start_index=k * n_paths)
        e = estimate_batch(b, "exit_time")
        vals.append(e.mean / xd ** p)
        ses.append(e.std_error / xd ** p)
    return RatioReport([float(x) for x in x_grid], vals, ses, label="E tau_U / x_d^(alpha-1)")


# ---------------------------------------------------------------------------
# boundary Harnack and Carleson


def exit_probability(params: KernelParams, config: SimConfig, x, V: BoxDomain, target: BoxDomain,
                     n_paths: int, threads: int = 1, start_index: int = 0) -> EstimateWithCI:
    b = simulate(params, config, x, V, n_paths, threads=threads, start_index=start_index)
    return estimate_batch(b, "indicator", target=target)


def bhp_ratio(params: KernelParams, config: SimConfig, w, r: float, target: BoxDomain, x_grid,
              n_paths: int = 100_000, threads: int = 1) -> RatioReport:
    """f(x) / x_d^(alpha-1) with f(x) = P_x(Y exits D_w(r/2, r/2) into target).

    ``x_grid`` lists heights; points sit above the lateral center w.  The
    report's ``extra`` carries the log-log decay fit of f against x_d.
    """
    validate(params)
    _require_transient_range(params)
    w = tuple(float(v) for v in (w if w is not None else (0.0,) * (params.d - 1)))
    V = BoxDomain.box(params.d, r / 2, r / 2, w)
    cfg = config.with_(eta_abs=config.eta_abs * r)
    p = params.alpha - 1.0
    vals, ses, probs = [], [], []
    for k, xd in enumerate(x_grid):
        e = exit_probability(params, cfg, _axis_point(params.d, xd, w), V, target, n_paths,
                             threads, start_index=k * n_paths)
        if e.mean == 0.0:
            raise DegenerateSample(f"no path from height {xd} reached the target")
        probs.append(e)
        vals.append(e.mean / xd ** p)
        ses.append(e.std_error / xd ** p)
    extra = {}
    if len(x_grid) >= 4:
        extra["decay_fit"] = fit_exponent(x_grid, [e.mean for e in probs]).to_dict()
    return RatioReport([float(x) for x in x_grid], vals, ses, label="BHP f(x)/x_d^(alpha-1)",
                       extra=extra)


def carleson_check(params: KernelParams, config: SimConfig, w, r: float, x_grid, x_hat=None,
                   target: BoxDomain | None = None, n_paths: int = 100_000,
                   threads: int = 1) -> RatioReport:
    """f(x) / f(x_hat) over points x near the boundary point (w, 0).

    f is the exit probability of ``bhp_ratio``; ``x_hat`` defaults to the point
    at height r/4 above w.  ``x_grid`` holds full points (or heights).
    """
    validate(params)
    d = params.d
    w = tuple(float(v) for v in (w if w is not None else (0.0,) * (d - 1)))
    V = BoxDomain.box(d, r / 2, r / 2, w)
    target = target or BoxDomain.box(d, 1.0, 1.0)
    cfg = config.with_(eta_abs=config.eta_abs * r)
    x_hat = _axis_point(d, r / 4, w) if x_hat is None else np.asarray(x_hat, dtype=float)
    if x_hat[-1] < r / 4:
        raise ValueError("the reference point must have height >= r/4")
    ref = exit_probability(params, cfg, x_hat, V, target, n_paths, threads, start_index=0)
    vals, ses, grid = [], [], []
    for k, x in enumerate(x_grid):
        x = _axis_point(d, x, w) if np.isscalar(x) else np.asarray(x, dtype=float)
        if np.linalg.norm(x - np.array([*w, 0.0])) >= r / 2:
            raise ValueError("Carleson grid points must lie in B(w, r/2)")
        e = exit_probability(params, cfg, x, V, target, n_paths, threads,
                             start_index=(k + 1) * n_paths)
        q, se = _ratio(e, ref) if e.mean > 0 else (0.0, 0.0)
        vals.append(q)
        ses.append(se)
        grid.append([float(v) for v in x])
    return RatioReport(grid, vals, ses, label="Carleson f(x)/f(x_hat)",
                       extra={"reference": ref.to_dict()})


# ---------------------------------------------------------------------------
# Green function


def green_bound_form(params: KernelParams, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = float(np.linalg.norm(x - y))
    a = params.alpha
    return (min(x[-1] / r, 1.0) ** (a - 1) * min(y[-1] / r, 1.0) ** (a - 1)) * r ** (a - params.d)


def green_estimate(params: KernelParams, config: SimConfig, x, y, rho: float | None = None,
                   n_paths: int = 100_000, threads: int = 1, start_index: int = 0) -> EstimateWithCI:
    """Mean occupation time of B(y, rho) before absorption, per unit volume."""
    validate(params)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dist = float(np.linalg.norm(x - y))
    if dist == 0.0:
        raise ValueError("x and y must differ")
    rho = dist / 8 if rho is None else rho
    if rho > dist / 4:
        raise ValueError("occupation ball radius must be at most |x - y| / 4")
    if dist < 10 * config.eta_abs:
        raise ValueError("|x - y| must be at least 10 eta_abs")
    b = simulate(params, config, x, BoxDomain.halfspace(params.d), n_paths,
                 probes=Probes(ball_center=tuple(y), ball_radius=rho), threads=threads,
                 start_index=start_index)
    e = estimate_batch(b, "ball_time")
    vol = ball_volume_in_halfspace(params.d, rho, float(y[-1]))
    return EstimateWithCI(e.mean / vol, e.std_error / vol, e.n_samples)


def green_ratio_sweep(params: KernelParams, config: SimConfig, pairs, n_paths: int = 100_000,
                      threads: int = 1) -> RatioReport:
    """G_hat(x, y) / bound form over a list of (x, y) pairs."""
    validate(params)
    _require_transient_range(params)
    if not params.d > min(params.alpha + params.beta1 + params.beta2, 2.0):
        raise ParameterOutOfRange("Green function bounds need d > min(alpha + beta1 + beta2, 2)")
    vals, ses, grid = [], [], []
    for k, (x, y) in enumerate(pairs):
        e = green_estimate(params, config, x, y, n_paths=n_paths, threads=threads,
                           start_index=k * n_paths)
        f = green_bound_form(params, x, y)
        vals.append(e.mean / f)
        ses.append(e.std_error / f)
        grid.append([list(map(float, x)), list(map(float, y))])
    return RatioReport(grid, vals, ses, label="G_hat / bound form")


def default_green_pairs(d: int = 2) -> list:
    """12 pairs: |x - y| in {0.5, 1}, x_d/|x-y| in {0.1, 0.5, 2}, y_d/|x-y| in {0.5, 2}."""
    pairs = []
    for dist in (0.5, 1.0):
        for sx in (0.1, 0.5, 2.0):
            for sy in (0.5, 2.0):
                xd, yd = sx * dist, sy * dist
                lateral = math.sqrt(max(dist * dist - (yd - xd) ** 2, 0.0))
                x = np.zeros(d)
                y = np.zeros(d)
                x[-1], y[-1] = xd, yd
                y[0] = lateral
                pairs.append((x, y))
    return pairs


# ---------------------------------------------------------------------------
# occupation integrals and lifetime


def occupation_estimates(params: KernelParams, config: SimConfig, gamma: float, x_d_grid,
                         D: BoxDomain, n_paths: int = 100_000, threads: int = 1) -> list[EstimateWithCI]:
    validate(params)
    if gamma <= -params.alpha:
        raise DivergentIntegrand(f"E int x_d^gamma dt diverges for gamma <= -alpha (gamma = {gamma})")
    out = []
    for k, xd in enumerate(x_d_grid):
        b = simulate(params, config, _axis_point(params.d, xd), D, n_paths,
                     probes=Probes(gamma=gamma), threads=threads, start_index=k * n_paths)
        out.append(estimate_batch(b, "occupation"))
    return out


def occupation_exponent(params: KernelParams, config: SimConfig, gamma: float, x_d_grid,
                        D: BoxDomain, R: float, n_paths: int = 100_000,
                        threads: int = 1) -> tuple[ExponentFit, list[EstimateWithCI]]:
    """Log-log slope of E_x int_0^tau_D (Y^d)^gamma dt against x_d (x on the axis)."""
    if D.kind == "box" and not (D.a <= R and D.b <= R and D.a >= R / 2 and D.b >= R / 2):
        raise ValueError("D must satisfy D(R/2, R/2) within D within D(R, R)")
    ests = occupation_estimates(params, config, gamma, x_d_grid, D, n_paths, threads)
    return fit_exponent(x_d_grid, [e.mean for e in ests]), ests


@dataclass(frozen=True)
class LogFit:
    a: float
    b: float
    r_squared: float
    b_stderr: float


def occupation_log_fit(params: KernelParams, x_d_grid, estimates, R: float) -> LogFit:
    """Fit value / x_d^(alpha-1) = a + b log(R / x_d) (the gamma = -1 case)."""
    x = np.asarray(x_d_grid, dtype=float)
    v = np.array([e.mean for e in estimates]) / x ** (params.alpha - 1)
    res = stats.linregress(np.log(R / x), v)
    return LogFit(float(res.intercept), float(res.slope), float(res.rvalue ** 2), float(res.stderr))


def lifetime_divergence(params: KernelParams, config: SimConfig, x0, T_grid,
                        n_paths: int = 20_000, threads: int = 1) -> dict:
    """E[zeta ^ T] for each T from a single run capped at max(T).

    Returns the estimates, their increments, the fraction absorbed before the
    cap, and a log-log fit of E[zeta ^ T] against T.
    """
    validate(params)
    _require_transient_range(params)
    T = np.asarray(sorted(T_grid), dtype=float)
    cfg = config.with_(time_cap=float(T[-1]))
    b = simulate(params, cfg, x0, BoxDomain.halfspace(params.d), n_paths, threads=threads)
    ests = [estimate_from_samples(np.minimum(b.exit_time, t)) for t in T]
    means = np.array([e.mean for e in ests])
    inc = np.diff(means)
    fit = fit_exponent(T, means) if T.size >= 4 else None
    return {"T": T.tolist(), "estimates": ests, "increments": inc.tolist(),
            "absorbed_fraction": float(np.mean(b.outcome == ABSORBED)), "fit": fit,
            "non_vanishing": bool(np.all(inc > 0) and (inc.size < 2 or inc[-1] >= 0.5 * inc[-2]))}


def n0_search(params: KernelParams, config: SimConfig, x0, n_max: int = 64,
              n_paths: int = 20_000, threads: int = 1) -> dict:
    """Smallest integer n with P_x(tau_{B(x, n x_d)} = zeta) > 1/2.

    A path stays in the ball until absorption exactly when its largest
    distance from x over accepted jumps (including the absorbing jump) is
    below n x_d, so one half-space run serves every n.
    """
    x0 = np.asarray(x0, dtype=float)
    b = simulate(params, config, x0, BoxDomain.halfspace(params.d), n_paths, threads=threads)
    done = b.outcome == ABSORBED
    if not np.any(done):
        raise DegenerateSample("no path was absorbed")
    probs = {}
    for n in range(1, n_max + 1):
        inside = done & (b.max_excursion < n * x0[-1])
        pr = float(np.mean(inside))
        probs[n] = pr
        if pr > 0.5:
            return {"n0": n, "probabilities": probs, "n_paths": n_paths}
    return {"n0": None, "probabilities": probs, "n_paths": n_paths}


# ---------------------------------------------------------------------------
# truncation diagnostics


def effective_exponent(params: KernelParams, delta: float) -> float:
    """Exponent p in (0, alpha-1] with truncated_op(g_p, x, delta x_d) = 0.

    The simulated process neglects jumps shorter than delta x_d; for it the
    boundary-harmonic power is x_d^p rather than x_d^(alpha-1).
    """
    _require_transient_range(params)
    a1 = params.alpha - 1.0
    f = lambda p: truncated_op(params, p, 1.0, delta)  # noqa: E731
    lo = 1e-3 * a1
    if f(lo) * f(a1) > 0:
        return a1
    return float(optimize.brentq(f, lo, a1, xtol=1e-8))


def harmonicity_bias_study(params: KernelParams, config: SimConfig, xd: float,
                           deltas=(0.2, 0.1, 0.05), r: float = 1.0, n_paths: int = 20_000,
                           threads: int = 1) -> list[dict]:
    out = []
    for dl in deltas:
        rep = harmonicity_defect(params, config.with_(delta=dl), [xd], r, n_paths, threads)
        out.append({"delta": dl, "ratio": float(rep.values[0]), "std_error": float(rep.std_errors[0]),
                    "defect": abs(float(rep.values[0]) - 1.0)})
    return out
