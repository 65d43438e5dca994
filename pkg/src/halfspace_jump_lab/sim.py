"""Monte Carlo simulation of the truncated jump process by exact thinning.

From a state x the truncation radius is eps = delta * x_d.  Proposals come
from the isotropic measure |z|^(-d-alpha) 1{|z| > eps} scaled by the kernel
envelope M_B, whose total mass gives the holding rate

    Lambda(x) = M_B * |S^(d-1)| * eps^(-alpha) / alpha.

A proposal y = x + z is accepted with probability B(x, y) / M_B when y_d > 0
and rejected otherwise; rejections advance time but not the state.

Every path i draws from its own Philox stream keyed by (seed, i), so a batch
is reproducible regardless of how paths are split across threads.
"""

from __future__ import annotations

import csv
import gzip
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numba
import numpy as np

from .errors import DegenerateSample
from .kernel import BoxDomain, KernelParams, kernel_envelope, sphere_area, validate

EXITED, ABSORBED, STEP_CAP, TIME_CAP = 0, 1, 2, 3
OUTCOME_NAMES = ("ExitedDomain", "AbsorbedAtBoundary", "StepCapReached", "TimeCapReached")


@dataclass(frozen=True)
class SimConfig:
    delta: float = 0.05
    eta_abs: float = 1e-4
    max_steps: int = 10_000_000
    seed: int = 0
    time_cap: float = math.inf

    def __post_init__(self):
        if not (0 < self.delta <= 0.5):
            raise ValueError(f"delta must lie in (0, 1/2], got {self.delta}")
        if not self.eta_abs > 0:
            raise ValueError("eta_abs must be positive")
        if int(self.max_steps) < 1:
            raise ValueError("max_steps must be >= 1")
        if not self.time_cap > 0:
            raise ValueError("time_cap must be positive")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValueError("seed must fit in 64 unsigned bits")

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {"delta": self.delta, "eta_abs": self.eta_abs, "max_steps": int(self.max_steps),
                "seed": int(self.seed),
                "time_cap": None if math.isinf(self.time_cap) else self.time_cap}


@dataclass
class ExitRecord:
    exit_position: np.ndarray
    exit_time: float
    outcome: str
    steps: int
    alpha: float
    gamma_integral: float = 0.0
    ball_time: float = 0.0

    def __post_init__(self):
        if self.exit_time < 0:
            raise ValueError("exit_time must be nonnegative")


@dataclass(frozen=True)
class EstimateWithCI:
    mean: float
    std_error: float
    n_samples: int

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.mean - 1.96 * self.std_error, self.mean + 1.96 * self.std_error)

    def to_dict(self) -> dict:
        lo, hi = self.ci95
        return {"mean": self.mean, "std_error": self.std_error, "n_samples": self.n_samples,
                "ci95": [lo, hi]}


def estimate_from_samples(values) -> EstimateWithCI:
    v = np.asarray(values, dtype=float)
    n = v.size
    if n == 0:
        raise DegenerateSample("no usable samples")
    mean = float(np.mean(v))
    se = float(np.std(v, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return EstimateWithCI(mean, se, n)


# ---------------------------------------------------------------------------
# compiled core


@numba.njit(cache=True, nogil=True)
def _kernel_value(xd, yd, dist, beta, norm):
    lo = min(xd, yd)
    hi = max(xd, yd)
    c1 = min(lo / dist, 1.0)
    c2 = min(hi / dist, 1.0)
    v = norm
    if beta[0] != 0.0:
        v *= c1 ** beta[0]
    if beta[1] != 0.0:
        v *= c2 ** beta[1]
    if beta[2] != 0.0:
        v *= math.log1p(c2 / c1) ** beta[2]
    if beta[3] != 0.0:
        v *= math.log1p(1.0 / c2) ** beta[3]
    return v


@numba.njit(cache=True, nogil=True)
def _inside(code, center, a, b, r, y):
    d = y.size
    if y[d - 1] <= 0.0:
        return False
    if code == 0:
        return True
    s = 0.0
    if code == 1:
        for i in range(d - 1):
            s += (y[i] - center[i]) ** 2
        return s < a * a and y[d - 1] < b
    for i in range(d):
        s += (y[i] - center[i]) ** 2
    return s < r * r


@numba.njit(cache=True, nogil=True)
def _propose(gen, x, eps, alpha, y):
    d = x.size
    rad = eps * (1.0 - gen.random()) ** (-1.0 / alpha)
    if d == 1:
        y[0] = x[0] + rad if gen.random() < 0.5 else x[0] - rad
        return rad
    nrm = 0.0
    for i in range(d):
        y[i] = gen.standard_normal()
        nrm += y[i] * y[i]
    nrm = math.sqrt(nrm)
    for i in range(d):
        y[i] = x[i] + rad * y[i] / nrm
    return rad


@numba.njit(cache=True, nogil=True)
def _run_path(gen, x0, alpha, beta, norm, mb, omega, delta, eta, max_steps, time_cap,
              code, center, a, b, r, gamma, use_gamma, ball_c, ball_r, use_ball, trace):
    d = x0.size
    x = x0.copy()
    y = np.empty(d)
    t = 0.0
    steps = 0
    gint = 0.0
    btime = 0.0
    ntrace = 0
    far = 0.0
    tcap = trace.shape[0]
    if x[d - 1] < eta:
        return ABSORBED, t, steps, x, gint, btime, far, ntrace
    while True:
        if steps >= max_steps:
            return STEP_CAP, t, steps, x, gint, btime, math.sqrt(far), ntrace
        eps = delta * x[d - 1]
        lam = mb * omega * eps ** (-alpha) / alpha
        hold = gen.exponential() / lam
        capped = t + hold >= time_cap
        if capped:
            hold = time_cap - t
        if use_gamma:
            gint += hold * x[d - 1] ** gamma
        if use_ball:
            s = 0.0
            for i in range(d):
                s += (x[i] - ball_c[i]) ** 2
            if s < ball_r * ball_r:
                btime += hold
        t += hold
        if capped:
            return TIME_CAP, time_cap, steps, x, gint, btime, math.sqrt(far), ntrace
        steps += 1
        rad = _propose(gen, x, eps, alpha, y)
        accepted = False
        if y[d - 1] > 0.0:
            bval = _kernel_value(x[d - 1], y[d - 1], rad, beta, norm)
            accepted = gen.random() * mb < bval
        if ntrace < tcap:
            trace[ntrace, 0] = steps
            trace[ntrace, 1] = t
            for i in range(d):
                trace[ntrace, 2 + i] = y[i] if accepted else x[i]
            trace[ntrace, 2 + d] = 1.0 if accepted else 0.0
            ntrace += 1
        if accepted:
            s = 0.0
            for i in range(d):
                x[i] = y[i]
                s += (y[i] - x0[i]) ** 2
            far = max(far, s)
            if not _inside(code, center, a, b, r, x):
                return EXITED, t, steps, x, gint, btime, math.sqrt(far), ntrace
            if x[d - 1] < eta:
                return ABSORBED, t, steps, x, gint, btime, math.sqrt(far), ntrace


@numba.njit(cache=True, nogil=True)
def _first_jumps(gen, x0, alpha, beta, norm, mb, eps, n, out):
    d = x0.size
    y = np.empty(d)
    for k in range(n):
        while True:
            rad = _propose(gen, x0, eps, alpha, y)
            if y[d - 1] > 0.0 and gen.random() * mb < _kernel_value(x0[d - 1], y[d - 1], rad, beta, norm):
                break
        for i in range(d):
            out[k, i] = y[i]


# ---------------------------------------------------------------------------
# Python-level API


def path_generator(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed), int(index)]))


class _Model:
    """Flattened kernel/config data handed to the compiled core."""

    def __init__(self, params: KernelParams, config: SimConfig):
        validate(params)
        self.params, self.config = params, config
        self.alpha = params.alpha
        self.d = params.d
        self.beta = np.asarray(params.beta, dtype=float)
        self.norm = params.normalization
        self.mb = kernel_envelope(params)
        self.omega = sphere_area(params.d - 1)

    def rate(self, xd: float) -> float:
        eps = self.config.delta * xd
        return self.mb * self.omega * eps ** (-self.alpha) / self.alpha


def propose_jump(params: KernelParams, x, eps: float, rng: np.random.Generator) -> np.ndarray:
    """Displacement with density proportional to |z|^(-d-alpha) on |z| > eps."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    d = params.d
    rad = eps * (1.0 - rng.random()) ** (-1.0 / params.alpha)
    if d == 1:
        return np.array([rad if rng.random() < 0.5 else -rad])
    v = rng.standard_normal(d)
    return rad * v / np.linalg.norm(v)


def step(params: KernelParams, config: SimConfig, x, rng: np.random.Generator, envelope: float | None = None):
    """One thinning step: returns (holding_time, next_state or None if rejected)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mb = envelope if envelope is not None else kernel_envelope(params)
    eps = config.delta * x[-1]
    lam = mb * sphere_area(params.d - 1) * eps ** (-params.alpha) / params.alpha
    hold = rng.exponential() / lam
    y = x + propose_jump(params, x, eps, rng)
    if y[-1] <= 0:
        return hold, None
    bval = _kernel_value(x[-1], y[-1], float(np.linalg.norm(y - x)), np.asarray(params.beta, float),
                         params.normalization)
    if rng.random() * mb < bval:
        return hold, y
    return hold, None


@dataclass
class Probes:
    """Optional per-path accumulators: int x_d^gamma dt and time spent in a ball."""

    gamma: float | None = None
    ball_center: tuple | None = None
    ball_radius: float = 0.0


@dataclass
class PathBatch:
    alpha: float
    outcome: np.ndarray
    exit_time: np.ndarray
    steps: np.ndarray
    exit_position: np.ndarray
    gamma_integral: np.ndarray
    ball_time: np.ndarray
    max_excursion: np.ndarray
    start_index: int = 0
    traces: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.outcome.size

    def record(self, i: int) -> ExitRecord:
        return ExitRecord(self.exit_position[i].copy(), float(self.exit_time[i]),
                          OUTCOME_NAMES[self.outcome[i]], int(self.steps[i]), self.alpha,
                          float(self.gamma_integral[i]), float(self.ball_time[i]))

    def fractions(self) -> dict:
        return {name: float(np.mean(self.outcome == k)) for k, name in enumerate(OUTCOME_NAMES)}

    def completed(self) -> np.ndarray:
        """Mask of paths that ended by exit or absorption (no cap)."""
        return self.outcome <= ABSORBED


def _check_start(x0, d):
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.size != d:
        raise ValueError(f"start point must have {d} coordinates")
    if not x0[-1] > 0:
        raise ValueError("start point must lie in the open half-space")
    return x0


def simulate(params: KernelParams, config: SimConfig, x0, domain: BoxDomain, n_paths: int, *,
             probes: Probes | None = None, start_index: int = 0, threads: int = 1,
             trace_steps: int = 0) -> PathBatch:
    """Run ``n_paths`` independent paths (indices start_index, start_index+1, ...)."""
    model = _Model(params, config)
    d = params.d
    x0 = _check_start(x0, d)
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if domain.d != d:
        raise ValueError("domain dimension does not match kernel dimension")
    if domain.kind != "halfspace" and not bool(domain.contains(x0)):
        raise ValueError("start point must lie inside the domain")
    probes = probes or Probes()
    code, center, a, b, r = domain.encode()
    use_gamma = probes.gamma is not None
    gamma = float(probes.gamma) if use_gamma else 0.0
    use_ball = probes.ball_center is not None
    ball_c = np.asarray(probes.ball_center if use_ball else np.zeros(d), dtype=float)
    ball_r = float(probes.ball_radius)
    tcap = max(int(trace_steps), 0)
    cfg = config

    outcome = np.empty(n_paths, dtype=np.int64)
    etime = np.empty(n_paths)
    steps = np.empty(n_paths, dtype=np.int64)
    epos = np.empty((n_paths, d))
    gint = np.empty(n_paths)
    btime = np.empty(n_paths)
    excursion = np.empty(n_paths)
    traces = [None] * n_paths if tcap else []

    def work(lo, hi):
        trace = np.empty((tcap, d + 3))
        for i in range(lo, hi):
            gen = path_generator(cfg.seed, start_index + i)
            res = _run_path(gen, x0, model.alpha, model.beta, model.norm, model.mb, model.omega,
                            cfg.delta, cfg.eta_abs, int(cfg.max_steps), float(cfg.time_cap),
                            code, center, a, b, r, gamma, use_gamma, ball_c, ball_r, use_ball, trace)
            outcome[i], etime[i], steps[i], epos[i], gint[i], btime[i], excursion[i], nt = res
            if tcap:
                traces[i] = trace[:nt].copy()

    threads = max(1, int(threads))
    if threads == 1 or n_paths < 2 * threads:
        work(0, n_paths)
    else:
        edges = np.linspace(0, n_paths, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda k: work(edges[k], edges[k + 1]), range(threads)))
    return PathBatch(params.alpha, outcome, etime, steps, epos, gint, btime, excursion, start_index, traces)


def run_until_exit(params: KernelParams, config: SimConfig, x0, domain: BoxDomain,
                   rng: np.random.Generator | None = None, path_index: int = 0,
                   probes: Probes | None = None) -> ExitRecord:
    """Single path.  ``rng`` overrides the (seed, path_index) stream when given."""
    if rng is None:
        return simulate(params, config, x0, domain, 1, probes=probes, start_index=path_index).record(0)
    model = _Model(params, config)
    x0 = _check_start(x0, params.d)
    probes = probes or Probes()
    code, center, a, b, r = domain.encode()
    use_gamma = probes.gamma is not None
    use_ball = probes.ball_center is not None
    ball_c = np.asarray(probes.ball_center if use_ball else np.zeros(params.d), dtype=float)
    res = _run_path(rng, x0, model.alpha, model.beta, model.norm, model.mb, model.omega,
                    config.delta, config.eta_abs, int(config.max_steps), float(config.time_cap),
                    code, center, a, b, r, float(probes.gamma or 0.0), use_gamma, ball_c,
                    float(probes.ball_radius), use_ball, np.empty((0, params.d + 3)))
    oc, t, n, pos, g, bt, _, _ = res
    return ExitRecord(pos, float(t), OUTCOME_NAMES[oc], int(n), params.alpha, float(g), float(bt))


def first_jump_sample(params: KernelParams, config: SimConfig, x0, n: int, seed: int | None = None) -> np.ndarray:
    """Targets of the first accepted jump from x0, ``n`` independent draws."""
    model = _Model(params, config)
    x0 = _check_start(x0, params.d)
    out = np.empty((n, params.d))
    gen = path_generator(config.seed if seed is None else seed, 2 ** 63)
    _first_jumps(gen, x0, model.alpha, model.beta, model.norm, model.mb, config.delta * x0[-1], n, out)
    return out


# ---------------------------------------------------------------------------
# functionals and estimation


def _functional_values(batch: PathBatch, functional, target: BoxDomain | None):
    if callable(functional):
        return np.asarray(functional(batch), dtype=float)
    if functional == "exit_time":
        return batch.exit_time
    if functional == "constant":
        return np.ones(batch.n)
    if functional == "occupation":
        return batch.gamma_integral
    if functional == "ball_time":
        return batch.ball_time
    if functional == "indicator":
        if target is None:
            raise ValueError("indicator functional needs a target domain")
        hit = np.asarray(target.contains(batch.exit_position), dtype=bool)
        return np.where(batch.outcome == EXITED, hit, False).astype(float)
    raise ValueError(f"unknown functional {functional!r}")


def terminal_value(f: Callable[[np.ndarray], np.ndarray]):
    """Functional f(Y_tau); absorbed paths are evaluated at their boundary projection."""

    def g(batch: PathBatch):
        pos = batch.exit_position.copy()
        pos[batch.outcome == ABSORBED, -1] = 0.0
        return f(pos)

    return g


def estimate(params: KernelParams, config: SimConfig, x0, domain: BoxDomain, functional,
             n_paths: int, *, target: BoxDomain | None = None, probes: Probes | None = None,
             allow_capped: bool = False, threads: int = 1, start_index: int = 0) -> EstimateWithCI:
    """Monte Carlo mean of a path functional with a normal-approximation CI.

    Capped paths are dropped unless ``allow_capped`` (then their truncated
    values enter, as for E[zeta ^ T]).
    """
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    if functional == "occupation" and (probes is None or probes.gamma is None):
        probes = Probes(gamma=0.0)
    batch = simulate(params, config, x0, domain, n_paths, probes=probes, threads=threads,
                     start_index=start_index)
    return estimate_batch(batch, functional, target=target, allow_capped=allow_capped)


def estimate_batch(batch: PathBatch, functional, *, target: BoxDomain | None = None,
                   allow_capped: bool = False) -> EstimateWithCI:
    vals = _functional_values(batch, functional, target)
    keep = np.ones(batch.n, dtype=bool) if allow_capped else batch.completed()
    if not np.any(keep):
        raise DegenerateSample("every path ended on a step or time cap")
    return estimate_from_samples(vals[keep])


def scaling_transport(record: ExitRecord, r: float) -> ExitRecord:
    """Image of a path record under x -> r x, t -> r^alpha t."""
    if not r > 0:
        raise ValueError("r must be positive")
    return replace(record, exit_position=np.asarray(record.exit_position) * r,
                   exit_time=record.exit_time * r ** record.alpha)


def dump_paths(batch: PathBatch, path: str, compress: bool | None = None) -> None:
    """CSV with rows (path_id, step, t, x_1..x_d, accepted_flag); gzip if requested or *.gz."""
    if not batch.traces:
        raise ValueError("batch was simulated without traces (trace_steps=0)")
    d = batch.exit_position.shape[1]
    compress = path.endswith(".gz") if compress is None else compress
    opener = gzip.open if compress else open
    with opener(path, "wt", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_id", "step", "t"] + [f"x_{i + 1}" for i in range(d)] + ["accepted_flag"])
        for k, tr in enumerate(batch.traces):
            pid = batch.start_index + k
            for row in tr:
                w.writerow([pid, int(row[0]), repr(float(row[1]))]
                           + [repr(float(v)) for v in row[2:2 + d]] + [int(row[2 + d])])
