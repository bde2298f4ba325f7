"""Synthetic benchmark harness for the 1-D search.

Objectives are registered by name with a fixed domain.  A run draws its
noise and its policy randomness from a seed derived from
``(master seed, initialization index, replication index)`` only, so every
policy sees the same initial pair and the same noise stream and results
can be compared pairwise.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import qmc

from . import belief
from .belief import ParametricFamilySpec
from .policy import NU_TOL, SbesConfig, optimize
from .posterior import MASS_TOL

__all__ = [
    "Objective",
    "NoiseSpec",
    "ExperimentConfig",
    "RunRecord",
    "OBJECTIVES",
    "POLICIES",
    "make_objective",
    "noisy_eval",
    "default_family",
    "baseline_random_search",
    "baseline_grid_equal",
    "run_single",
    "run_experiment",
    "summarize",
    "write_runs_csv",
    "write_summary_csv",
    "write_trace_csv",
    "load_configs",
]

SCAN_POINTS = 4096
REGRET_FLOOR = 1e-16
SIGMA_FLOOR = 1e-6  # belief noise floor relative to the range span, used when gamma = 0
GRID_EQUAL_SIZE = 8
SCALE_GRID = (0.5, 1.0, 2.0)
POLICIES = ("sbes", "sbes-scale", "random-search", "grid-equal")
RUN_FIELDS = ("run_id", "policy", "objective", "gamma", "N", "m", "K", "seed", "recommendation", "regret")
TRACE_FIELDS = ("run_id", "n", "h", "z", "y_hat", "nu_bits", "entropy_bits", "kl_bits", "recommend", "regret")
SUMMARY_FIELDS = (
    "policy", "objective", "gamma", "N", "runs",
    "log10_mean_regret", "mean_log10_regret", "median_regret",
    "max_nu_bits", "posterior_violations",
)


# ---------------------------------------------------------------------------
# objectives
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Objective:
    """Noiseless truth on ``domain``.

    ``range_span`` is the spread of values over a 4096-point scan, which
    sets the noise scale through the noise ratio.
    """

    name: str
    evaluate: Callable[[float], float]
    domain: tuple[float, float]
    known_max_location: float
    range_span: float = field(default=float("nan"))

    def __post_init__(self):
        if math.isnan(self.range_span):
            xs = np.linspace(*self.domain, SCAN_POINTS)
            ys = self.evaluate(xs)
            object.__setattr__(self, "range_span", float(np.max(ys) - np.min(ys)))

    @property
    def max_value(self) -> float:
        return float(self.evaluate(self.known_max_location))

    def regret(self, x) -> float:
        return abs(self.max_value - float(self.evaluate(x)))

    def __call__(self, x):
        return self.evaluate(x)


def mccormick_1d(x):
    x = np.asarray(x, dtype=float)
    return -np.sin(x) - x**2 + 1.5 * x + 10.0


def ackley_1d(x):
    x = np.asarray(x, dtype=float)
    return 4.0 * np.exp(-np.abs(x)) + np.exp(np.cos(x)) - 4.0 - math.e


def _argmax_bounded(fn, lo, hi) -> float:
    xs = np.linspace(lo, hi, SCAN_POINTS)
    i = int(np.argmax(fn(xs)))
    step = xs[1] - xs[0]
    res = minimize_scalar(
        lambda t: -float(fn(t)), bounds=(max(lo, xs[i] - step), min(hi, xs[i] + step)),
        method="bounded", options={"xatol": 1e-12},
    )
    return float(res.x)


def _build_objectives():
    g = belief.gaussian_pdf
    return {
        "gamma-pdf": lambda: Objective(
            "gamma-pdf", lambda x: belief.gamma_pdf(x, 9.0, 1.0), (0.0, 20.0), 8.0
        ),
        "beta-pdf": lambda: Objective(
            "beta-pdf", lambda x: belief.beta_pdf(x, 3.0, 18.0), (0.0, 1.0), 2.0 / 19.0
        ),
        "gaussian-pdf": lambda: Objective(
            "gaussian-pdf", lambda x: g(x, 7.5, 1.0), (0.0, 15.0), 7.5
        ),
        "mccormick-1d": lambda: Objective(
            "mccormick-1d", mccormick_1d, (-1.5, 4.0), _argmax_bounded(mccormick_1d, -1.5, 4.0)
        ),
        "ackley-1d": lambda: Objective("ackley-1d", ackley_1d, (-5.0, 5.0), 0.0),
    }


OBJECTIVES = tuple(_build_objectives())


def make_objective(name: str) -> Objective:
    """Registered test function by name (see ``OBJECTIVES``)."""
    builders = _build_objectives()
    if name not in builders:
        raise KeyError(f"unknown objective {name!r}; choose from {', '.join(builders)}")
    return builders[name]()


@dataclass(frozen=True)
class NoiseSpec:
    """Noise ratio ``gamma``; the standard deviation is ``gamma * range_span``."""

    gamma: float
    range_span: float = 1.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")

    @property
    def sigma(self) -> float:
        return self.gamma * self.range_span

    @classmethod
    def for_objective(cls, obj: Objective, gamma: float) -> "NoiseSpec":
        return cls(gamma, obj.range_span)


def noisy_eval(obj: Objective, noise: NoiseSpec, x, rng: np.random.Generator) -> float:
    """One observation ``f(x) + sigma * N(0, 1)``.

    A normal draw is consumed even when ``sigma = 0`` so the random stream
    does not depend on the noise level.
    """
    a, b = obj.domain
    if not a <= x <= b:
        raise ValueError(f"x={x} outside {obj.domain}")
    return float(obj.evaluate(x)) + noise.sigma * float(rng.standard_normal())


# ---------------------------------------------------------------------------
# default belief families
# ---------------------------------------------------------------------------


def default_family(name: str, K: int = 32, scaled: bool = False) -> ParametricFamilySpec:
    """Belief grid of ``K`` parameter tuples for a registered objective.

    For the three parametric objectives the grid is centred on the true
    parameters, so the truth is a member.  The two black-box objectives
    get shifted quadratics, a deliberately misspecified family.  With
    ``scaled`` every tuple is crossed with the scales ``0.5, 1, 2``.
    """
    if K < 2:
        raise ValueError("K must be >= 2")
    offsets = np.arange(K) - K // 2
    if name == "gaussian-pdf":
        grid = [(7.5 + 13.5 / K * o, 1.0) for o in offsets]
        family = "gaussian-pdf"
    elif name == "gamma-pdf":
        grid = [(9.0 + 14.0 / K * o, 1.0) for o in offsets]
        family = "gamma-pdf"
    elif name == "beta-pdf":
        grid = [(3.0 + 3.6 / K * o, 18.0) for o in offsets]
        family = "beta-pdf"
    elif name == "mccormick-1d":
        vertices = np.linspace(-1.5, 4.0, K + 2)[1:-1]
        grid = [(float(v), 1.0, 10.0) for v in vertices]
        family = "quadratic"
    elif name == "ackley-1d":
        vertices = np.linspace(-5.0, 5.0, K + 2)[1:-1]
        grid = [(float(v), 0.63, 0.0) for v in vertices]
        family = "quadratic"
    else:
        raise KeyError(f"no default family for {name!r}")
    grid = [tuple(float(v) for v in p) for p in grid]
    return ParametricFamilySpec(family, grid, list(SCALE_GRID) if scaled else None)


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------


def baseline_random_search(obj: Objective, noise: NoiseSpec, N: int, rng) -> float:
    """Evaluate ``N + 1`` uniform points once each; recommend the best observed."""
    rng = np.random.default_rng(rng)
    xs = rng.uniform(*obj.domain, size=N + 1)
    ys = [noisy_eval(obj, noise, float(x), rng) for x in xs]
    return float(xs[int(np.argmax(ys))])


def baseline_grid_equal(obj: Objective, noise: NoiseSpec, N: int, rng, size: int = GRID_EQUAL_SIZE) -> float:
    """Spread ``N + 1`` evaluations over an equispaced grid of cell midpoints.

    Each point gets ``(N + 1) // size`` evaluations and the remainder goes
    to the first points in order.  Recommends the largest sample mean.
    """
    rng = np.random.default_rng(rng)
    total = N + 1
    size = min(size, total)
    a, b = obj.domain
    xs = a + (np.arange(size) + 0.5) * (b - a) / size
    counts = np.full(size, total // size)
    counts[: total % size] += 1
    means = [np.mean([noisy_eval(obj, noise, float(x), rng) for _ in range(c)]) for x, c in zip(xs, counts)]
    return float(xs[int(np.argmax(means))])


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """One (objective, policy, noise ratio) cell of the benchmark.

    ``family`` overrides the default belief grid for the objective.  The
    run count is ``inits * reps``.
    """

    objective: str
    policy: str = "sbes"
    gamma: float = 0.005
    budget: int = 30
    m: int = 20
    K: int = 32
    family: dict | None = None
    inits: int = 15
    reps: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        for name in ("budget", "m", "K", "inits", "reps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")

    def family_spec(self) -> ParametricFamilySpec:
        if self.family is not None:
            spec = ParametricFamilySpec.from_dict(self.family)
            if self.policy == "sbes-scale" and spec.scale_grid is None:
                spec = replace(spec, scale_grid=list(SCALE_GRID))
            return spec
        return default_family(self.objective, self.K, scaled=self.policy == "sbes-scale")


@dataclass
class RunRecord:
    run_id: int
    policy: str
    objective: str
    gamma: float
    N: int
    m: int
    K: int
    seed: int
    recommendation: float
    regret: float
    max_nu_bits: float = float("-inf")
    posterior_violations: int = 0
    trace: list = field(default_factory=list, repr=False)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in RUN_FIELDS}


def init_pairs(domain, count: int, seed: int) -> np.ndarray:
    """Latin-hypercube initial pairs, one row per initialization, each sorted."""
    sampler = qmc.LatinHypercube(d=2, seed=np.random.default_rng([seed, 0x1A7]))
    a, b = domain
    pts = qmc.scale(sampler.random(count), [a, a], [b, b])
    return np.sort(pts, axis=1)


def run_seed(master: int, init: int, rep: int) -> int:
    """Integer seed shared by every policy for the same (initialization, replication)."""
    return int(np.random.SeedSequence([master, init, rep]).generate_state(1)[0])


def _check_posterior(state) -> int:
    p = state.posterior
    return int(abs(p.total_mass - 1.0) > MASS_TOL or bool(np.any(p.densities < 0)))


def run_single(config: ExperimentConfig, init: int, rep: int, x0=None, ensemble=None,
               obj: Objective | None = None, keep_trace: bool = False, on_iteration=None) -> RunRecord:
    """Run one (initialization, replication) of ``config``.

    ``on_iteration(state)`` is forwarded to the search (sbes policies only).
    """
    obj = obj or make_objective(config.objective)
    noise = NoiseSpec.for_objective(obj, config.gamma)
    seed = run_seed(config.seed, init, rep)
    noise_seq, policy_seq = np.random.SeedSequence(seed).spawn(2)
    noise_rng = np.random.default_rng(noise_seq)
    if x0 is None:
        x0 = init_pairs(obj.domain, config.inits, config.seed)[init]
    record = RunRecord(
        run_id=init * config.reps + rep, policy=config.policy, objective=config.objective,
        gamma=float(config.gamma), N=config.budget, m=config.m, K=config.K, seed=seed,
        recommendation=float("nan"), regret=float("nan"),
    )
    if config.policy == "random-search":
        rec = baseline_random_search(obj, noise, config.budget, noise_rng)
    elif config.policy == "grid-equal":
        rec = baseline_grid_equal(obj, noise, config.budget, noise_rng)
    else:
        if ensemble is None:
            ensemble = config.family_spec().ensemble(obj.domain, _belief_sigma(obj, noise))
        sbes_cfg = SbesConfig(
            obj.domain, ensemble, budget=config.budget, m=config.m,
            seed=policy_seq, x0=(float(x0[0]), float(x0[1])),
        )

        def watch(state):
            record.posterior_violations += _check_posterior(state)
            if on_iteration is not None:
                on_iteration(state)

        rec, trace = optimize(lambda x: noisy_eval(obj, noise, x, noise_rng), sbes_cfg, on_iteration=watch)
        record.max_nu_bits = max(t.nu_bits for t in trace)
        if keep_trace:
            record.trace = trace
    record.recommendation = float(rec)
    record.regret = obj.regret(rec)
    return record


def _belief_sigma(obj: Objective, noise: NoiseSpec) -> float:
    return max(noise.sigma, SIGMA_FLOOR * obj.range_span)


def _run_chunk(args):
    config, jobs, keep_trace = args
    obj = make_objective(config.objective)
    ensemble = None
    if config.policy in ("sbes", "sbes-scale"):
        ensemble = config.family_spec().ensemble(obj.domain, _belief_sigma(obj, NoiseSpec.for_objective(obj, config.gamma)))
    pairs = init_pairs(obj.domain, config.inits, config.seed)
    return [
        run_single(config, i, r, x0=pairs[i], ensemble=ensemble, obj=obj, keep_trace=keep_trace)
        for i, r in jobs
    ]


def run_experiment(config: ExperimentConfig, workers: int = 1, keep_traces: bool = False):
    """All ``inits * reps`` runs of ``config``; returns ``(records, summary_row)``.

    Records come back sorted by ``run_id`` whatever the worker count.
    """
    jobs = [(i, r) for i in range(config.inits) for r in range(config.reps)]
    if workers <= 1:
        records = _run_chunk((config, jobs, keep_traces))
    else:
        chunks = [jobs[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = [rec for part in pool.map(_run_chunk, [(config, c, keep_traces) for c in chunks]) for rec in part]
    records.sort(key=lambda r: r.run_id)
    return records, summarize(records)


def summarize(records) -> dict:
    """Log-of-mean and mean-of-log regret, with zero regret floored at 1e-16."""
    regrets = np.array([r.regret for r in records], dtype=float)
    floored = np.maximum(regrets, REGRET_FLOOR)
    first = records[0]
    return {
        "policy": first.policy, "objective": first.objective, "gamma": first.gamma, "N": first.N,
        "runs": len(records),
        "log10_mean_regret": float(np.log10(max(regrets.mean(), REGRET_FLOOR))),
        "mean_log10_regret": float(np.mean(np.log10(floored))),
        "median_regret": float(np.median(regrets)),
        "max_nu_bits": float(max(r.max_nu_bits for r in records)),
        "posterior_violations": int(sum(r.posterior_violations for r in records)),
    }


def nu_violations(records) -> int:
    return sum(r.max_nu_bits > NU_TOL for r in records)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(row[k]) for k in header])
    Path(path).write_text(buf.getvalue())


def write_runs_csv(path, records):
    _write_csv(path, RUN_FIELDS, [r.row() for r in records])


def write_summary_csv(path, summaries):
    _write_csv(path, SUMMARY_FIELDS, summaries)


def write_trace_csv(path, record: RunRecord, obj: Objective | None = None):
    obj = obj or make_objective(record.objective)
    rows = [
        {**asdict(t), "run_id": record.run_id, "regret": obj.regret(t.recommend)}
        for t in record.trace
    ]
    _write_csv(path, TRACE_FIELDS, rows)


def load_configs(path) -> list[ExperimentConfig]:
    """Read a JSON benchmark config.

    The file holds one object (or a list of objects) whose keys are
    ``ExperimentConfig`` fields.  ``policy`` and ``gamma`` may be lists,
    in which case every combination is run.
    """
    raw = json.loads(Path(path).read_text())
    entries = raw if isinstance(raw, list) else [raw]
    known = set(ExperimentConfig.__dataclass_fields__)
    out = []
    for entry in entries:
        unknown = set(entry) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        policies = entry.get("policy", "sbes")
        gammas = entry.get("gamma", 0.005)
        for pol in policies if isinstance(policies, list) else [policies]:
            for gam in gammas if isinstance(gammas, list) else [gammas]:
                out.append(ExperimentConfig(**{**entry, "policy": pol, "gamma": float(gam)}))
    return out
