"""The acceptance suite: one function per numbered criterion.

Each check returns a :class:`CriterionResult` with status ``pass``, ``fail`` or
``inconclusive``.  Statistical checks only report ``pass`` when the confidence
interval lies inside the budget, and only ``fail`` when it lies outside.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize, stats

from .errors import DivergentIntegrand
from .kernel import BoxDomain, KernelParams, model_b_lengths
from .nonlocal_ops import constant_C, hardy_lower_bound, hardy_ratio, pv_apply, truncated_op
from .potential import (bhp_ratio, carleson_check, default_green_pairs, effective_exponent,
                        exit_time_decay, exit_time_ks, exit_time_scaling_check, fit_exponent,
                        green_bound_form, green_estimate, green_ratio_sweep, harmonicity_bias_study,
                        harmonicity_defect, lifetime_divergence, n0_search, occupation_estimates,
                        occupation_log_fit)
from .profiles import PowerProfile, smooth_bump, triangle_bump
from .quad import integrate_1d, integrate_semiinfinite, QuadSpec
from .sim import SimConfig, first_jump_sample

BETAS = [(0.0, 0.0, 0.0, 0.0), (0.5, 0.0, 0.0, 0.0), (0.3, 0.4, 0.0, 0.0), (0.5, 0.4, 0.5, 0.5)]
ALPHAS = [1.2, 1.5, 1.8]


@dataclass
class CriterionResult:
    criterion_id: int
    title: str
    status: str
    measured: object
    budget: object
    details: dict = field(default_factory=dict)
    runtime_s: float = 0.0

    def line(self) -> str:
        return (f"criterion {self.criterion_id:2d} [{self.status.upper():>12}] {self.title}: "
                f"measured={_short(self.measured)} budget={_short(self.budget)} "
                f"({self.runtime_s:.1f}s)")

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _short(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def _worst(statuses) -> str:
    statuses = list(statuses)
    if "fail" in statuses:
        return "fail"
    if "inconclusive" in statuses:
        return "inconclusive"
    return "pass"


@dataclass
class Profile:
    """Sizes for the simulation criteria.  ``quick`` divides path counts by 10."""

    seed: int = 20240601
    delta: float = 0.02
    eta_abs: float = 1e-4
    paths: int = 100_000
    threads: int = 1
    scale: float = 1.0

    def n(self, full: int) -> int:
        return max(200, int(round(full * self.scale)))

    def sim(self, **kw) -> SimConfig:
        base = dict(delta=self.delta, eta_abs=self.eta_abs, seed=self.seed)
        base.update(kw)
        return SimConfig(**base)

    @classmethod
    def quick(cls, **kw):
        return cls(scale=0.1, **kw)


# ---------------------------------------------------------------------------
# deterministic criteria


def criterion_1(profile: Profile | None = None) -> CriterionResult:
    """C vanishes at p = 0 and p = alpha - 1, and is continuous across both zeros."""
    worst, rows = 0.0, []
    for d in (1, 2):
        for a in ALPHAS:
            for beta in BETAS:
                P = KernelParams(a, d, beta)
                for p0 in (0.0, a - 1.0):
                    vals = [constant_C(P, p0 + h).value for h in (0.0, -1e-10, 1e-10)]
                    m = max(abs(v) for v in vals)
                    worst = max(worst, m)
                    rows.append({"d": d, "alpha": a, "beta": beta, "p": p0, "max_abs": m})
    return CriterionResult(1, "zeros of C", "pass" if worst < 1e-8 else "fail", worst, 1e-8,
                           {"rows": rows})


def _open_grid(lo, hi, n):
    return lo + (hi - lo) * np.arange(1, n + 1) / (n + 1)


def criterion_2(profile: Profile | None = None) -> CriterionResult:
    """Positive and strictly increasing on ((alpha-1)+, alpha+beta1); negative on (0, alpha-1)."""
    ok = True
    min_val, min_gap, max_neg = math.inf, math.inf, -math.inf
    rows = []
    for d in (1, 2):
        for a in ALPHAS:
            for beta in BETAS:
                P = KernelParams(a, d, beta)
                grid = _open_grid(max(a - 1.0, 0.0), a + beta[0], 20)
                res = [constant_C(P, float(p)) for p in grid]
                v = np.array([r.value for r in res])
                e = np.array([r.error for r in res])
                gaps = np.diff(v) - (e[1:] + e[:-1])
                ok &= bool(np.all(v - e > 0) and np.all(gaps > 0))
                min_val = min(min_val, float(np.min(v)))
                min_gap = min(min_gap, float(np.min(gaps)))
                row = {"d": d, "alpha": a, "beta": beta, "min": float(v.min()),
                       "min_increment": float(np.diff(v).min())}
                if a == 1.5:
                    neg = [constant_C(P, float(p)) for p in _open_grid(0.0, a - 1.0, 10)]
                    top = max(r.value + r.error for r in neg)
                    max_neg = max(max_neg, top)
                    ok &= top < 0
                    row["max_on_negative_side"] = top
                rows.append(row)
    return CriterionResult(2, "sign and monotonicity of C", "pass" if ok else "fail",
                           {"min_value": min_val, "min_increment_minus_error": min_gap,
                            "max_value_on_(0,alpha-1)": max_neg},
                           "min_value > 0, increments > 0, negative side < 0", {"rows": rows})


def criterion_3(profile: Profile | None = None) -> CriterionResult:
    """pv_apply(g_p) = C x_d^(p - alpha) to 1e-4 relative; g_(alpha-1) maps to 0."""
    worst_rel, worst_zero, rows = 0.0, 0.0, []
    a = 1.5
    for d in (1, 2):
        for beta in [(0.0, 0.0, 0.0, 0.0), (0.5, 0.3, 0.0, 0.0)]:
            P = KernelParams(a, d, beta)
            for p in (0.3, 1.2):
                C = constant_C(P, p).value
                for xd in (0.25, 0.5, 1.0, 2.0, 4.0):
                    r = pv_apply(P, PowerProfile(p), xd)
                    rel = abs(r.value - C * xd ** (p - a)) / abs(C * xd ** (p - a))
                    worst_rel = max(worst_rel, rel)
                    rows.append({"d": d, "beta": beta, "p": p, "x_d": xd, "rel_err": rel})
            for xd in (0.25, 0.5, 1.0, 2.0, 4.0):
                r = pv_apply(P, PowerProfile(a - 1.0), xd)
                tol = 1e-5 / xd * max(1.0, xd ** (a - 1.0))
                worst_zero = max(worst_zero, abs(r.value) / tol)
    ok = worst_rel <= 1e-4 and worst_zero <= 1.0
    return CriterionResult(3, "operator identity", "pass" if ok else "fail",
                           {"max_rel_err": worst_rel, "max_zero_residual_over_tol": worst_zero},
                           {"rel": 1e-4, "zero_residual_over_tol": 1.0}, {"rows": rows})


def criterion_4(profile: Profile | None = None) -> CriterionResult:
    """Per x_d, sup over eps of |L_eps g_p| / x_d^(p-alpha); stable across x_d (max/min <= 5)."""
    a = 1.5
    worst, rows = 1.0, []
    for d in (1, 2):
        for beta in [(0.0, 0.0, 0.0, 0.0), (0.5, 0.3, 0.0, 0.0)]:
            P = KernelParams(a, d, beta)
            for p in (0.3, 1.2):
                sups = []
                for xd in (0.5, 1.0, 2.0):
                    vals = [abs(truncated_op(P, p, xd, xd / k)) / xd ** (p - a) for k in (2, 8, 64)]
                    sups.append(max(vals))
                ratio = max(sups) / min(sups)
                worst = max(worst, ratio)
                rows.append({"d": d, "beta": beta, "p": p, "sup_per_xd": sups, "ratio": ratio})
    return CriterionResult(4, "truncated operator bound", "pass" if worst <= 5 else "fail",
                           worst, 5.0, {"rows": rows})


def random_bumps(n: int, seed: int = 7):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        c = rng.uniform(0.5, 4.0)
        w = rng.uniform(0.1, 0.9) * c
        if k % 3 == 2:
            out.append(triangle_bump(c - w, c + w, rng.uniform(0.5, 2.0)))
        else:
            out.append(smooth_bump(c, w, rng.uniform(0.5, 2.0)))
    return out


def criterion_5(profile: Profile | None = None) -> CriterionResult:
    """Hardy ratio of 10 random bumps exceeds the best -C(p) on the p-grid, minus 1e-3."""
    bumps = random_bumps(10)
    margin, rows = math.inf, []
    for a in ALPHAS:
        for beta in [(0.0, 0.0, 0.0, 0.0), (0.5, 0.3, 0.0, 0.0)]:
            P = KernelParams(a, 1, beta)
            bound, pstar = hardy_lower_bound(P)
            for i, u in enumerate(bumps):
                ratio = hardy_ratio(P, u)
                margin = min(margin, ratio - (bound - 1e-3))
                rows.append({"alpha": a, "beta": beta, "bump": i, "ratio": ratio,
                             "bound": bound, "p_star": pstar})
    return CriterionResult(5, "Hardy inequality", "pass" if margin >= 0 else "fail",
                           {"min_margin": margin}, "margin >= 0", {"rows": rows})


# ---------------------------------------------------------------------------
# simulation criteria


def criterion_6(profile: Profile | None = None) -> CriterionResult:
    pr = profile or Profile()
    n = pr.n(10_000)
    rows, worst = [], 1.0
    from .sim import simulate

    for beta in [(0.0, 0.0, 0.0, 0.0), (0.5, 0.0, 0.0, 0.0)]:
        P = KernelParams(1.5, 1, beta)
        b = simulate(P, pr.sim(delta=0.1), [1.0], BoxDomain.halfspace(1), n, threads=pr.threads)
        frac = b.fractions()
        worst = min(worst, frac["AbsorbedAtBoundary"])
        rows.append({"beta": beta, "n_paths": n, **frac, "max_steps_used": int(b.steps.max())})
    return CriterionResult(6, "finite lifetime", "pass" if worst >= 0.999 else "fail", worst, 0.999,
                           {"rows": rows})


def criterion_7(profile: Profile | None = None) -> CriterionResult:
    pr = profile or Profile()
    grid = [0.25, 0.3, 0.4]
    statuses, rows = [], []
    for beta, budget in [((0.0, 0.0, 0.0, 0.0), 0.05), ((0.5, 0.3, 0.0, 0.0), 0.07)]:
        P = KernelParams(1.5, 1, beta)
        rep = harmonicity_defect(P, pr.sim(), grid, 1.0, pr.n(100_000), pr.threads)
        inside = (rep.ci_lo >= 1 - budget) & (rep.ci_hi <= 1 + budget)
        outside = (rep.ci_hi < 1 - budget) | (rep.ci_lo > 1 + budget)
        statuses.append("pass" if np.all(inside) else ("fail" if np.any(outside) else "inconclusive"))
        rows.append({"beta": beta, "bias_budget": budget, **rep.to_dict()})
    P = KernelParams(1.5, 1)
    study = harmonicity_bias_study(P, pr.sim(), 0.25, (0.2, 0.1, 0.05), 1.0, pr.n(20_000), pr.threads)
    measured = [float(v) for r in rows for v in (e["estimate"] for e in r["rows"])]
    return CriterionResult(7, "probabilistic harmonicity", _worst(statuses), measured,
                           "95% CI inside 1 +- 0.05 (beta=0) / 1 +- 0.07 (beta=(0.5,0.3))",
                           {"reports": rows, "delta_study": study, "delta": pr.delta})


def criterion_8(profile: Profile | None = None) -> CriterionResult:
    pr = profile or Profile()
    P = KernelParams(1.5, 2)
    V = BoxDomain.strip(2, 1.0)
    x0 = np.array([0.0, 0.2])
    rep = exit_time_scaling_check(P, pr.sim(), x0, V, [0.5, 2.0, 4.0], pr.n(100_000), pr.threads)
    inside = (rep.ci_lo >= 0.95) & (rep.ci_hi <= 1.05)
    outside = (rep.ci_hi < 0.95) | (rep.ci_lo > 1.05)
    # a fixed-size test: fewer paths would only cost power, so quick mode keeps the full sample
    ks = exit_time_ks(P, pr.sim(), x0, V, 2.0, 20_000, pr.threads)
    statuses = ["pass" if np.all(inside) else ("fail" if np.any(outside) else "inconclusive"),
                "pass" if ks.pvalue >= 0.01 else "fail"]
    return CriterionResult(8, "exit-time scaling", _worst(statuses),
                           {"ratios": rep.values.tolist(), "ks_pvalue": float(ks.pvalue)},
                           {"ratio_range": [0.95, 1.05], "ks_alpha": 0.01}, rep.to_dict())


def criterion_9(profile: Profile | None = None) -> CriterionResult:
    pr = profile or Profile()
    P = KernelParams(1.5, 1)
    grid = [2.0 ** -k for k in range(2, 8)]
    rep = exit_time_decay(P, pr.sim(), grid, 1.0, pr.n(50_000), pr.threads)
    return CriterionResult(9, "exit-time boundary decay", rep.budget_status(5.0),
                           rep.sup_inf_ratio, 5.0, rep.to_dict())


def criterion_10(profile: Profile | None = None) -> CriterionResult:
    pr = profile or Profile()
    grid = [2.0 ** -k for k in range(2, 8)]
    statuses, rows = [], []
    slope_info = None
    for d in (1, 2):
        target = BoxDomain.box(d, 1.0, 1.0)
        for beta in [(0.0, 0.0, 0.0, 0.0), (0.5, 0.0, 0.0, 0.0), (0.3, 0.4, 0.0, 0.0)]:
            P = KernelParams(1.5, d, beta)
            # the decay slope comes from the plain d = 1 row and needs the larger sample;
            # the ratio budgets are an order of magnitude above the measured ratios
            slope_row = d == 1 and beta == (0.0, 0.0, 0.0, 0.0)
            n = pr.n(100_000 if slope_row else 40_000)
            rep = bhp_ratio(P, pr.sim(), None, 1.0, target, grid, n, pr.threads)
            statuses.append(rep.budget_status(10.0))
            rows.append({"d": d, "beta": beta, **rep.to_dict()})
            if slope_row:
                slope_info = rep.extra["decay_fit"]
    slope = slope_info["slope"]
    se = slope_info["slope_stderr"]
    if abs(slope - 0.5) + 1.96 * se <= 0.1:
        statuses.append("pass")
    elif abs(slope - 0.5) - 1.96 * se > 0.1:
        statuses.append("fail")
    else:
        statuses.append("inconclusive")
    P = KernelParams(1.5, 1)
    car = carleson_check(P, pr.sim(), None, 1.0, [2.0 ** -k for k in range(2, 8)],
                         n_paths=pr.n(40_000), threads=pr.threads)
    cmax = float(np.max(car.values))
    chi = float(np.max(car.ci_hi))
    statuses.append("pass" if chi <= 20 else ("fail" if float(np.max(car.ci_lo)) > 20 else "inconclusive"))
    measured = {"max_sup_inf_ratio": max(r["sup_inf_ratio"] for r in rows),
                "decay_slope": slope, "carleson_max": cmax}
    return CriterionResult(10, "boundary Harnack, Carleson, decay", _worst(statuses), measured,
                           {"bhp": 10.0, "carleson": 20.0, "slope": "0.5 +- 0.1"},
                           {"bhp": rows, "carleson": car.to_dict()})


def _z_consistent(a, b) -> str:
    z = abs(a.mean - b.mean) / math.hypot(a.std_error, b.std_error)
    return "pass" if z <= 2.576 else "fail"


def criterion_11(profile: Profile | None = None) -> CriterionResult:
    pr = profile or Profile()
    P = KernelParams(1.5, 2)
    n = pr.n(100_000)
    cfg = pr.sim()
    statuses = []
    x, y = np.array([0.0, 1.0]), np.array([0.6, 1.8])
    gxy = green_estimate(P, cfg, x, y, n_paths=n, threads=pr.threads, start_index=0)
    gyx = green_estimate(P, cfg, y, x, n_paths=n, threads=pr.threads, start_index=n)
    statuses.append(_z_consistent(gxy, gyx))
    # the cutoff delta*x_d depends on the starting point, so the truncated kernel is not
    # symmetric; record how the asymmetry moves with delta (diagnostic only)
    sym_study = []
    for k, dl in enumerate((0.1, 0.05)):
        c = cfg.with_(delta=dl)
        a = green_estimate(P, c, x, y, n_paths=n, threads=pr.threads, start_index=(8 + 2 * k) * n)
        b = green_estimate(P, c, y, x, n_paths=n, threads=pr.threads, start_index=(9 + 2 * k) * n)
        sym_study.append({"delta": dl, "G(x,y)": a.to_dict(), "G(y,x)": b.to_dict(),
                          "relative_gap": a.mean / b.mean - 1.0})
    sym_study.append({"delta": cfg.delta, "G(x,y)": gxy.to_dict(), "G(y,x)": gyx.to_dict(),
                      "relative_gap": gxy.mean / gyx.mean - 1.0})
    r = 2.0
    g_big = green_estimate(P, cfg.with_(eta_abs=cfg.eta_abs * r), r * x, r * y, n_paths=n,
                           threads=pr.threads, start_index=2 * n)
    scaled = type(g_big)(g_big.mean * r ** (P.d - P.alpha), g_big.std_error * r ** (P.d - P.alpha),
                         g_big.n_samples)
    statuses.append(_z_consistent(gxy, scaled))
    sweep = green_ratio_sweep(P, cfg, default_green_pairs(2), n, pr.threads)
    statuses.append(sweep.budget_status(20.0))
    # boundary decay at fixed y
    yb = np.array([0.0, 1.0])
    heights = [2.0 ** -k for k in range(3, 8)]
    ests = [green_estimate(P, cfg, np.array([0.0, h]), yb, rho=1.0 / 8, n_paths=n,
                           threads=pr.threads, start_index=(3 + k) * n) for k, h in enumerate(heights)]
    fit = fit_exponent(heights, [e.mean for e in ests])
    dev = abs(fit.slope - 0.5)
    statuses.append("pass" if dev + 1.96 * fit.slope_stderr <= 0.1 else
                    ("fail" if dev - 1.96 * fit.slope_stderr > 0.1 else "inconclusive"))
    measured = {"G(x,y)": gxy.mean, "G(y,x)": gyx.mean,
                "symmetry_z": (gxy.mean - gyx.mean) / math.hypot(gxy.std_error, gyx.std_error),
                "scaled G": scaled.mean,
                "sweep_sup_inf": sweep.sup_inf_ratio, "decay_slope": fit.slope}
    return CriterionResult(11, "Green function", _worst(statuses), measured,
                           {"symmetry/scaling": "|z| <= 2.576", "sweep": 20.0, "slope": "0.5 +- 0.1"},
                           {"statuses": statuses, "symmetry_delta_study": sym_study,
                            "sweep": sweep.to_dict(), "decay_fit": fit.to_dict(),
                            "decay_estimates": [e.to_dict() for e in ests],
                            "bound_form_example": green_bound_form(P, x, y)})


OCCUPATION_ETA = 1e-9


def criterion_12(profile: Profile | None = None) -> CriterionResult:
    pr = profile or Profile()
    P = KernelParams(1.5, 1)
    D = BoxDomain.strip(1, 1.0)
    cfg = pr.sim(eta_abs=OCCUPATION_ETA)
    n = pr.n(40_000)
    statuses, details = [], {}

    def slope_status(fit, target):
        dev = abs(fit.slope - target)
        if dev + 1.96 * fit.slope_stderr <= 0.1:
            return "pass"
        return "fail" if dev - 1.96 * fit.slope_stderr > 0.1 else "inconclusive"

    shallow = [2.0 ** -k for k in range(3, 8)]
    deep = [2.0 ** -k for k in range(10, 15)]
    # the shallow grid feels the far wall at R = 1 (local slope ~0.36 at x_d = 1/8),
    # so it is reported but the exponent is graded where x_d << R
    s0 = occupation_estimates(P, cfg, 0.0, shallow, D, n, pr.threads)
    fs = fit_exponent(shallow, [e.mean for e in s0])
    e0 = occupation_estimates(P, cfg, 0.0, deep, D, n, pr.threads)
    f0 = fit_exponent(deep, [e.mean for e in e0])
    statuses.append(slope_status(f0, 0.5))
    e12 = occupation_estimates(P, cfg, -1.2, deep, D, n, pr.threads)
    f12 = fit_exponent(deep, [e.mean for e in e12])
    statuses.append(slope_status(f12, 0.3))
    e1 = occupation_estimates(P, cfg, -1.0, deep, D, n, pr.threads)
    lf = occupation_log_fit(P, deep, e1, 1.0)
    statuses.append("pass" if (lf.b > 0 and lf.r_squared >= 0.9) else "fail")
    try:
        occupation_estimates(P, cfg, -1.5, shallow[:1], D, 2, pr.threads)
        statuses.append("fail")
        rejected = False
    except DivergentIntegrand:
        rejected = True
    measured = {"slope_gamma_0": f0.slope, "slope_gamma_-1.2": f12.slope, "log_fit_b": lf.b,
                "log_fit_r2": lf.r_squared, "gamma_-1.5_rejected": rejected}
    details.update({"fit_gamma_0": f0.to_dict(), "fit_gamma_0_shallow": fs.to_dict(),
                    "estimates_gamma_0_shallow": [e.to_dict() for e in s0], "fit_gamma_-1.2": f12.to_dict(),
                    "log_fit": lf.__dict__, "grid_gamma_0": shallow, "grid_deep": deep,
                    "eta_abs": OCCUPATION_ETA, "statuses": statuses,
                    "estimates": {"0": [e.to_dict() for e in e0], "-1.2": [e.to_dict() for e in e12],
                                  "-1": [e.to_dict() for e in e1]}})
    return CriterionResult(12, "occupation exponents", _worst(statuses), measured,
                           {"slope": "+-0.1", "b": "> 0", "r2": ">= 0.9"}, details)


def criterion_13(profile: Profile | None = None) -> CriterionResult:
    pr = profile or Profile()
    P = KernelParams(1.5, 1)
    res = lifetime_divergence(P, pr.sim(), [1.0], [10.0, 20.0, 40.0, 80.0], pr.n(20_000), pr.threads)
    ests = res["estimates"]
    inc = np.diff([e.mean for e in ests])
    # standard errors of increments bounded by the sum of the two SEs (positively correlated)
    inc_se = [ests[i].std_error + ests[i + 1].std_error for i in range(len(ests) - 1)]
    positive = all(i - 1.96 * s > 0 for i, s in zip(inc, inc_se))
    n0 = n0_search(P, pr.sim(), np.array([1.0]), n_paths=pr.n(20_000), threads=pr.threads)
    ok = res["non_vanishing"] and positive and n0["n0"] is not None
    return CriterionResult(13, "infinite mean lifetime", "pass" if ok else "fail",
                           {"increments": inc.tolist(), "n0": n0["n0"]},
                           "increments > 0, last >= 0.5 x previous, n0 found",
                           {"means": [e.mean for e in ests], "increment_se": inc_se,
                            "absorbed_fraction_at_cap": res["absorbed_fraction"],
                            "n0_probabilities": n0["probabilities"]})


def first_jump_bins(params: KernelParams, x: float, eps: float, n_bins: int = 50):
    """Bin edges with equal probability under the normalized first-jump density."""
    spec = QuadSpec(1e-13, 1e-11)

    def dens(y):
        return np.abs(y - x) ** (-1 - params.alpha) * model_b_lengths(params, x, y, np.abs(y - x))

    left = integrate_1d(dens, 0.0, x - eps, spec).value if x - eps > 0 else 0.0
    right = integrate_semiinfinite(dens, x + eps, spec, decay_exponent=1 + params.alpha, scale=eps).value
    total = left + right

    def cdf(y):
        if y <= x - eps:
            return integrate_1d(dens, 0.0, y, spec).value / total
        if y < x + eps:
            return left / total
        return (left + integrate_1d(dens, x + eps, y, spec).value) / total

    edges = [0.0]
    for k in range(1, n_bins):
        q = k / n_bins
        if q <= left / total:
            edges.append(optimize.brentq(lambda y: cdf(y) - q, 1e-300, x - eps, xtol=1e-14))
        else:
            hi = x + eps
            while cdf(hi) < q:
                hi = x + 2 * (hi - x)
            edges.append(optimize.brentq(lambda y: cdf(y) - q, x + eps, hi, xtol=1e-14))
    edges.append(math.inf)
    return np.array(edges), total


def criterion_14(profile: Profile | None = None) -> CriterionResult:
    pr = profile or Profile()
    n = 1_000_000 if pr.scale >= 1 else 100_000
    rows, statuses = [], []
    for k, beta in enumerate([(0.0, 0.0, 0.0, 0.0), (0.5, 0.0, 0.0, 0.0)]):
        P = KernelParams(1.5, 1, beta)
        edges, _ = first_jump_bins(P, 1.0, 0.25)
        ys = first_jump_sample(P, pr.sim(delta=0.25), [1.0], n, seed=pr.seed + k)[:, 0]
        counts = np.histogram(ys, bins=edges)[0]
        res = stats.chisquare(counts)
        statuses.append("pass" if res.pvalue >= 0.01 else "fail")
        rows.append({"beta": beta, "chi2": float(res.statistic), "pvalue": float(res.pvalue), "n": n})
    return CriterionResult(14, "thinning exactness (first jump)", _worst(statuses),
                           [r["pvalue"] for r in rows], 0.01, {"rows": rows})


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 15)}


# wall-clock budgets in seconds for the default profile
RUNTIME_BUDGET = {1: 30, 2: 120, 3: 300, 4: 120, 5: 300, 6: 300, 7: 600, 8: 600, 9: 600,
                  10: 1800, 11: 2700, 12: 1200, 13: 600, 14: 300}


def run_criterion(i: int, profile: Profile | None = None) -> CriterionResult:
    t0 = time.perf_counter()
    res = CRITERIA[i](profile)
    res.runtime_s = time.perf_counter() - t0
    return res


def run_all(profile: Profile | None = None, ids=None, echo=None) -> list[CriterionResult]:
    out = []
    for i in ids or sorted(CRITERIA):
        res = run_criterion(i, profile)
        if echo:
            echo(res.line())
        out.append(res)
    return out


def bias_diagnostics(alpha: float = 1.5, deltas=(0.2, 0.1, 0.05, 0.02, 0.01)) -> dict:
    """Effective boundary exponent of the truncated process for several delta."""
    P = KernelParams(alpha, 1)
    return {dl: effective_exponent(P, dl) for dl in deltas}
