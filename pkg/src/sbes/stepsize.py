"""Stochastic gradient ascent with the 1-D search as a line-search rule.

Every objective is oriented for maximization: the convex test functions
are negated so that the same ascent loop serves both suites.  Gradients
come from central finite differences of noisy evaluations (FDSA).  The
line search maximizes ``phi(alpha) = f_hat(x + alpha * u)`` over
``[0, alpha_max]``, where ``u`` is the unit ascent direction and
``alpha_max`` the distance to the boundary along ``u``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import special_ortho_group

from .belief import BeliefCurve, BeliefEnsemble
from .policy import SbesConfig, optimize

__all__ = [
    "MultiObjective",
    "StepsizeRule",
    "SgdTrace",
    "NOISE_SD",
    "BANDS",
    "SUITES",
    "RULES",
    "make_multi_objective",
    "suite_objectives",
    "fdsa_gradient",
    "ray_length",
    "sbes_linesearch",
    "linesearch_ensemble",
    "run_sgd",
    "init_sampler",
    "run_stepsize_suite",
    "summarize_stepsize",
    "write_stepsize_csvs",
]

NOISE_SD = 0.1
FDSA_FRACTION = 0.05
INNER_BUDGET = 5
BANDS = {"close": (0.0, 0.25), "medium": (0.25, 0.75), "far": (0.75, 1.0)}
RULES = ("harmonic", "rmsprop", "adagrad", "sbes-single", "sbes-mix")
MAX_INIT_DRAWS = 100_000
_EPS = 1e-8


# ---------------------------------------------------------------------------
# objectives
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MultiObjective:
    """Truth on the hypercube ``[lo, hi]^d``, oriented for maximization."""

    name: str
    dim: int
    evaluate: Callable[[np.ndarray], float]
    lo: np.ndarray
    hi: np.ndarray
    optimum: np.ndarray
    suite: str = "convex"

    @property
    def d_max(self) -> float:
        """Distance from the optimum to the farthest vertex."""
        far = np.where(self.optimum - self.lo > self.hi - self.optimum, self.lo, self.hi)
        return float(np.linalg.norm(far - self.optimum))

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def __call__(self, x) -> float:
        return float(self.evaluate(np.asarray(x, dtype=float)))

    def distance(self, x) -> float:
        return float(np.linalg.norm(np.asarray(x) - self.optimum))


def _box(d, lo, hi):
    return np.full(d, float(lo)), np.full(d, float(hi))


def bohachevsky(x):
    x1, x2 = x
    return x1**2 + 2 * x2**2 - 0.3 * math.cos(3 * math.pi * x1) - 0.4 * math.cos(4 * math.pi * x2) + 0.7


def rotated_hyper_ellipsoid(x):
    return float(np.sum(np.cumsum(x**2)))


def sum_of_different_powers(x):
    return float(np.sum(np.abs(x) ** np.arange(2, x.size + 2)))


def _gaussian_kernel(mean, cov):
    prec = np.linalg.inv(cov)

    def f(x):
        r = x - mean
        return float(np.exp(-0.5 * r @ prec @ r))

    return f


def _gaussian_params(d):
    """Fixed off-centre mean and a rotated, anisotropic covariance."""
    if d == 2:
        return np.array([2.9, 2.2]), np.array([[4.0, 1.0], [1.0, 3.0]])
    rot = special_ortho_group.rvs(d, random_state=d)
    scales = np.linspace(3.0, 6.0, d)
    mean = 2.5 + 0.5 * np.sin(np.arange(1, d + 1))
    return mean, rot @ np.diag(scales) @ rot.T


def make_multi_objective(name: str, dim: int | None = None) -> MultiObjective:
    """Registered objective; ``dim`` is ignored for the fixed 2-D Bohachevsky."""
    if name == "bohachevsky":
        lo, hi = _box(2, -100, 100)
        return MultiObjective(name, 2, lambda x: -bohachevsky(x), lo, hi, np.zeros(2), "convex")
    if dim is None:
        raise ValueError(f"{name} needs a dimension")
    if name == "rotated-hyper-ellipsoid":
        lo, hi = _box(dim, -65.536, 65.536)
        return MultiObjective(name, dim, lambda x: -rotated_hyper_ellipsoid(x), lo, hi, np.zeros(dim), "convex")
    if name == "sum-of-different-powers":
        lo, hi = _box(dim, -1, 1)
        return MultiObjective(name, dim, lambda x: -sum_of_different_powers(x), lo, hi, np.zeros(dim), "convex")
    if name == "gaussian-density":
        mean, cov = _gaussian_params(dim)
        lo, hi = _box(dim, 0, 5)
        return MultiObjective(name, dim, _gaussian_kernel(mean, cov), lo, hi, mean, "nonconvex")
    raise KeyError(f"unknown objective {name!r}")


SUITES = {
    "convex": [("bohachevsky", 2)]
    + [("rotated-hyper-ellipsoid", d) for d in (5, 10, 20)]
    + [("sum-of-different-powers", d) for d in (5, 10, 20)],
    "nonconvex": [("gaussian-density", 2), ("gaussian-density", 10)],
}


def suite_objectives(suite: str) -> list[MultiObjective]:
    if suite not in SUITES:
        raise KeyError(f"unknown suite {suite!r}")
    return [make_multi_objective(n, d) for n, d in SUITES[suite]]


# ---------------------------------------------------------------------------
# gradients and line search
# ---------------------------------------------------------------------------


def _noisy(obj, x, rng, sigma):
    return obj(x) + sigma * float(rng.standard_normal())


def fdsa_gradient(obj: MultiObjective, x, c, rng, sigma=NOISE_SD, return_mean=False):
    """Central differences with perturbations clipped to the box.

    Uses ``2 d`` noisy evaluations.  Each difference is divided by the
    actual spacing after clipping.  With ``return_mean`` the average of
    all evaluations is returned too, a cheap estimate of ``f(x)``.
    """
    x = np.asarray(x, dtype=float)
    c = np.broadcast_to(np.asarray(c, dtype=float), x.shape)
    grad = np.empty_like(x)
    total = 0.0
    for i in range(x.size):
        up, down = x.copy(), x.copy()
        up[i] = min(x[i] + c[i], obj.hi[i])
        down[i] = max(x[i] - c[i], obj.lo[i])
        fu, fd = _noisy(obj, up, rng, sigma), _noisy(obj, down, rng, sigma)
        grad[i] = (fu - fd) / (up[i] - down[i])
        total += fu + fd
    if return_mean:
        return grad, total / (2 * x.size)
    return grad


def ray_length(x, u, lo, hi) -> float:
    """Largest ``t >= 0`` with ``x + t u`` inside the box."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hi = np.where(u > 0, (hi - x) / u, np.inf)
        t_lo = np.where(u < 0, (lo - x) / u, np.inf)
    return float(max(0.0, np.min(np.minimum(t_hi, t_lo))))


@dataclass(frozen=True)
class StepsizeRule:
    """Stepsize rule with its hyperparameters.

    The three classical rules scale the raw gradient; the two search
    rules pick a length along the unit gradient direction.
    """

    kind: str
    a: float = 5.0  # harmonic
    rate: float | None = None  # adagrad / rmsprop base rate
    rho: float = 0.9  # rmsprop decay
    inner_budget: int = INNER_BUDGET
    m: int = 20

    def __post_init__(self):
        if self.kind not in RULES:
            raise ValueError(f"unknown rule {self.kind!r}")
        if self.rate is None:
            object.__setattr__(self, "rate", {"adagrad": 0.5, "rmsprop": 0.1}.get(self.kind, 0.0))

    @property
    def is_search(self) -> bool:
        return self.kind.startswith("sbes")


def _bump(alpha, base, height, center, width):
    alpha = np.asarray(alpha, dtype=float)
    return base + height * np.exp(-0.5 * ((alpha - center) / width) ** 2)


def _parabola(alpha, f0, slope, vertex):
    alpha = np.asarray(alpha, dtype=float)
    return f0 + slope * alpha - slope * alpha**2 / (2.0 * vertex)


def linesearch_ensemble(kind: str, suite: str, alpha_max: float, f0: float, slope: float,
                        sigma: float = NOISE_SD) -> BeliefEnsemble:
    """Belief curves for ``phi`` on ``[0, alpha_max]``, anchored at ``phi(0) = f0``.

    Nonconvex suite: Gaussian bumps.  ``sbes-single`` uses 16 equal bumps
    (width 0.3 alpha_max, height 0.5) at shifted centres; ``sbes-mix``
    crosses widths 0.15/0.3/0.6 with heights 0.25/0.6/1.0 on interleaved
    centres.  Convex suite: parabolas matching ``f0`` and the directional
    slope at 0, with the vertex spread over the interval; ``sbes-mix``
    also scales the slope by 0.5 and 2.
    """
    curves = []
    if suite == "nonconvex":
        if kind == "sbes-single":
            shapes = [(0.3, 0.5)]
        else:
            shapes = [(w, h) for w in (0.15, 0.3, 0.6) for h in (0.25, 0.6, 1.0)]
        n_centres = 16 if kind == "sbes-single" else 6
        total = n_centres * len(shapes)
        for j, (w, h) in enumerate(shapes):
            for i in range(n_centres):
                # interleave centres across shapes so all maximizers are distinct
                c = (i * len(shapes) + j + 0.5) / total * alpha_max
                width = w * alpha_max
                base = f0 - h * math.exp(-0.5 * (c / width) ** 2)
                fn = _BoundCurve(_bump, (base, h, c, width))
                curves.append(BeliefCurve(f"bump(c={c:.4g},w={w},h={h})", fn, c))
    elif suite == "convex":
        slope = max(slope, 1e-12)
        mults = (1.0,) if kind == "sbes-single" else (0.5, 1.0, 2.0)
        n_vertices = 16 if kind == "sbes-single" else 8
        total = n_vertices * len(mults)
        for j, k in enumerate(mults):
            for i in range(n_vertices):
                v = (i * len(mults) + j + 0.5) / total * alpha_max
                fn = _BoundCurve(_parabola, (f0, k * slope, v))
                curves.append(BeliefCurve(f"parabola(v={v:.4g},k={k})", fn, v))
    else:
        raise KeyError(f"unknown suite {suite!r}")
    return BeliefEnsemble.uniform(curves, sigma, (0.0, alpha_max))


@dataclass(frozen=True)
class _BoundCurve:
    fn: Callable
    params: tuple

    def __call__(self, alpha):
        return self.fn(alpha, *self.params)


def sbes_linesearch(obj: MultiObjective, x, direction, rule: StepsizeRule, rng,
                    sigma=NOISE_SD, f0=None, slope=None, suite=None):
    """Stepsize along the unit ascent ``direction`` chosen by the 1-D search.

    Returns ``(alpha, evaluations)``; the inner search spends
    ``inner_budget + 1`` evaluations of ``phi``.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(direction, dtype=float)
    if not math.isclose(float(np.linalg.norm(u)), 1.0, rel_tol=1e-9):
        raise ValueError("direction must be a unit vector")
    alpha_max = ray_length(x, u, obj.lo, obj.hi)
    if alpha_max <= 1e-12 * float(np.max(obj.width)):
        return 0.0, 0
    rng = np.random.default_rng(rng)
    if f0 is None:
        f0 = obj(x)
    if slope is None:
        slope = 1.0
    ens = linesearch_ensemble(rule.kind, suite or obj.suite, alpha_max, f0, slope, sigma)
    count = 0

    def phi(alpha):
        nonlocal count
        count += 1
        return _noisy(obj, np.clip(x + alpha * u, obj.lo, obj.hi), rng, sigma)

    cfg = SbesConfig((0.0, alpha_max), ens, budget=rule.inner_budget, m=rule.m, seed=rng)
    alpha, _ = optimize(phi, cfg)
    return float(alpha), count


# ---------------------------------------------------------------------------
# gradient ascent
# ---------------------------------------------------------------------------


@dataclass
class SgdTrace:
    iterates: list = field(default_factory=list)
    distances: list = field(default_factory=list)
    stepsizes: list = field(default_factory=list)
    evaluations: list = field(default_factory=list)

    @property
    def reduction(self) -> float:
        return self.distances[0] - self.distances[-1]


def run_sgd(obj: MultiObjective, rule: StepsizeRule, x0, iterations: int = 10, rng=None,
            sigma: float = NOISE_SD) -> SgdTrace:
    """Ten (by default) ascent steps from ``x0`` with FDSA gradients.

    ``stepsizes`` records the length of each move before clipping.
    """
    rng = np.random.default_rng(rng)
    x = np.asarray(x0, dtype=float).copy()
    if np.any(x < obj.lo) or np.any(x > obj.hi):
        raise ValueError("x0 outside the hypercube")
    c = FDSA_FRACTION * obj.width
    trace = SgdTrace([x.copy()], [obj.distance(x)], [], [])
    acc = np.zeros_like(x)
    for t in range(iterations):
        grad, f0 = fdsa_gradient(obj, x, c, rng, sigma, return_mean=True)
        evals = 2 * x.size
        norm = float(np.linalg.norm(grad))
        if norm == 0.0:
            step = np.zeros_like(x)
        elif rule.is_search:
            u = grad / norm
            alpha, n = sbes_linesearch(obj, x, u, rule, rng, sigma, f0=f0, slope=norm)
            evals += n
            step = alpha * u
        elif rule.kind == "harmonic":
            step = rule.a / (rule.a + t) * grad
        elif rule.kind == "adagrad":
            acc += grad**2
            step = rule.rate * grad / (np.sqrt(acc) + _EPS)
        else:
            acc = rule.rho * acc + (1.0 - rule.rho) * grad**2
            step = rule.rate * grad / (np.sqrt(acc) + _EPS)
        x = np.clip(x + step, obj.lo, obj.hi)
        trace.iterates.append(x.copy())
        trace.distances.append(obj.distance(x))
        trace.stepsizes.append(float(np.linalg.norm(step)))
        trace.evaluations.append(evals)
    return trace


def init_sampler(obj: MultiObjective, band: str, rng) -> np.ndarray:
    """Point in the box whose distance to the optimum lies in the band.

    Bands are fractions of ``d_max``.  Proposals alternate between uniform
    points of the box and points on the segment from the optimum to a
    random vertex, since in high dimension uniform points almost never
    fall near the optimum or near a corner.
    """
    if band not in BANDS:
        raise KeyError(f"unknown band {band!r}")
    rng = np.random.default_rng(rng)
    r1, r2 = (f * obj.d_max for f in BANDS[band])
    for draw in range(MAX_INIT_DRAWS):
        if draw % 2 == 0:
            x = rng.uniform(obj.lo, obj.hi)
        else:
            vertex = np.where(rng.random(obj.dim) < 0.5, obj.lo, obj.hi)
            x = obj.optimum + rng.random() * (vertex - obj.optimum)
        if r1 <= obj.distance(x) <= r2:
            return x
    raise RuntimeError(f"no point found in band {band!r} after {MAX_INIT_DRAWS} draws")


# ---------------------------------------------------------------------------
# suite runner
# ---------------------------------------------------------------------------

RUN_FIELDS = ("rule", "objective", "dim", "band", "init_id", "rep", "dist0", "dist10", "reduction")


def run_stepsize_suite(suite: str, band: str, inits: int = 20, reps: int = 1, seed: int = 0,
                       rules=RULES, iterations: int = 10, sigma: float = NOISE_SD):
    """Every rule on every objective of ``suite`` from the same start points.

    Start points depend on ``(seed, objective index, init)`` and noise on
    ``(seed, objective index, init, rep)``, so rules are compared on
    identical starts and identical noise streams.
    """
    rows = []
    band_id = list(BANDS).index(band)
    for oi, obj in enumerate(suite_objectives(suite)):
        for i in range(inits):
            x0 = init_sampler(obj, band, np.random.default_rng([seed, band_id, oi, i]))
            for r in range(reps):
                for rule_name in rules:
                    rng = np.random.default_rng([seed, band_id, oi, i, r, 1])
                    tr = run_sgd(obj, StepsizeRule(rule_name), x0, iterations, rng, sigma)
                    rows.append({
                        "rule": rule_name, "objective": obj.name, "dim": obj.dim, "band": band,
                        "init_id": i, "rep": r, "dist0": tr.distances[0],
                        "dist10": tr.distances[-1], "reduction": tr.reduction,
                    })
    return rows


def summarize_stepsize(rows, suite: str, rules=RULES):
    """Mean reduction per (objective, dim) cell, then the uniform average over cells."""
    cells = sorted({(r["objective"], r["dim"]) for r in rows}, key=lambda c: (c[0], c[1]))
    band = rows[0]["band"]
    out = []
    for name, dim in cells:
        row = {"suite": suite, "band": band, "objective": name, "dim": dim}
        for rule in rules:
            vals = [r["reduction"] for r in rows if r["rule"] == rule and (r["objective"], r["dim"]) == (name, dim)]
            row[rule] = float(np.mean(vals))
        out.append(row)
    overall = {"suite": suite, "band": band, "objective": "all", "dim": ""}
    for rule in rules:
        overall[rule] = float(np.mean([c[rule] for c in out]))
    out.append(overall)
    return out


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(row[k]) for k in header])
    return buf.getvalue()


def write_stepsize_csvs(out_dir, rows, summary, rules=RULES):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "stepsize_runs.csv").write_text(_csv_text(RUN_FIELDS, rows))
    header = ("suite", "band", "objective", "dim", *rules)
    (out / "stepsize_summary.csv").write_text(_csv_text(header, summary))
