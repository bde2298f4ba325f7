"""Sampled belief model over the truth function.

A :class:`BeliefEnsemble` holds ``K`` candidate unimodal curves with
posterior weights kept in log space.  From it we derive the probability
of correct region assignment for a pair of points (``g``) and the
probability of observing ``f(x_l) > f(x_r)`` when the maximizer sits
strictly between them (``g_bar``).
"""
from __future__ import annotations

import csv
import functools
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import betaln, gammaln, logsumexp, ndtr

__all__ = [
    "PROB_EPS",
    "BeliefCurve",
    "BeliefEnsemble",
    "ParametricFamilySpec",
    "comparison_probabilities",
    "g_single",
    "g_mixture",
    "g_bar",
    "update_weights",
    "gaussian_pdf",
    "gamma_pdf",
    "beta_pdf",
    "quadratic",
    "load_tabulated",
]

PROB_EPS = 1e-12
_SCAN_POINTS = 4096
_GOLDEN_ITERS = 40
_UNIMODAL_POINTS = 1024
_OPTIMA_SPACING = 1e-7
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# curve families
# ---------------------------------------------------------------------------


def gaussian_pdf(x, mu, sd, scale=1.0):
    x = np.asarray(x, dtype=float)
    z = (x - mu) / sd
    return scale * np.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))


def gamma_pdf(x, k, lam, scale=1.0, loc=0.0):
    x = np.asarray(x, dtype=float) - loc
    out = np.zeros_like(x)
    pos = x > 0
    xp = x[pos]
    out[pos] = np.exp(k * math.log(lam) + (k - 1.0) * np.log(xp) - lam * xp - gammaln(k))
    return scale * out


def beta_pdf(x, a, b, scale=1.0):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > 0) & (x < 1)
    xi = x[inside]
    out[inside] = np.exp((a - 1.0) * np.log(xi) + (b - 1.0) * np.log1p(-xi) - betaln(a, b))
    return scale * out


def quadratic(x, vertex, curvature, height, scale=1.0):
    x = np.asarray(x, dtype=float)
    return scale * (height - curvature * (x - vertex) ** 2)


def _tabulated(x, xs, ys, scale=1.0):
    return scale * np.interp(np.asarray(x, dtype=float), xs, ys)


@dataclass(frozen=True)
class FamilyMember:
    """Picklable ``x -> family(x, *params, scale=scale)``."""

    family: Callable
    params: tuple
    scale: float = 1.0

    def __call__(self, x):
        return self.family(x, *self.params, scale=self.scale)


_FAMILIES: dict[str, Callable] = {
    "gaussian-pdf": gaussian_pdf,
    "gamma-pdf": gamma_pdf,
    "beta-pdf": beta_pdf,
    "quadratic": quadratic,
}


def load_tabulated(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column ``x, f(x)`` CSV (header optional).

    ``x`` must be strictly increasing.
    """
    xs, ys = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                if xs:
                    raise
                continue  # header line
            xs.append(x)
            ys.append(y)
    xs, ys = np.asarray(xs), np.asarray(ys)
    if xs.size < 2 or np.any(np.diff(xs) <= 0):
        raise ValueError(f"{path}: x column must be strictly increasing with >= 2 rows")
    return xs, ys


# ---------------------------------------------------------------------------
# curves and ensembles
# ---------------------------------------------------------------------------


def _golden_max(fn, lo, hi, iters=_GOLDEN_ITERS):
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = fn(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


def is_unimodal(values: np.ndarray) -> bool:
    """True if the discrete differences change sign at most once, from + to -."""
    diffs = np.diff(np.asarray(values, dtype=float))
    span = float(np.ptp(values))
    tol = 1e-12 * span if span > 0 else 0.0
    signs = np.sign(diffs[np.abs(diffs) > tol])
    if signs.size == 0:
        return True
    changes = np.flatnonzero(signs[1:] != signs[:-1])
    if changes.size == 0:
        return True
    return changes.size == 1 and signs[0] > 0


@dataclass(frozen=True, eq=False)
class BeliefCurve:
    """One candidate truth curve ``f_k`` with its precomputed maximizer."""

    label: str
    evaluate: Callable[[np.ndarray], np.ndarray]
    argmax_location: float

    @classmethod
    def from_function(cls, label, fn, domain, check_unimodal=True) -> "BeliefCurve":
        a, b = map(float, domain)
        grid = np.linspace(a, b, _SCAN_POINTS)
        vals = np.asarray(fn(grid), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"curve {label!r} is not finite on [{a}, {b}]")
        if check_unimodal:
            coarse = np.asarray(fn(np.linspace(a, b, _UNIMODAL_POINTS)), dtype=float)
            if not is_unimodal(coarse):
                raise ValueError(f"curve {label!r} is not unimodal on [{a}, {b}]")
        i = int(np.argmax(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        x_best, f_best = _golden_max(lambda t: float(fn(np.array([t]))[0]), lo, hi)
        if f_best < vals[i]:
            x_best = float(grid[i])
        return cls(label, fn, float(x_best))


@dataclass(frozen=True, eq=False)
class BeliefEnsemble:
    """Weighted set of belief curves with known Gaussian noise level.

    Weights are stored as natural logs and always normalized so that
    ``exp(log_weights)`` sums to one.
    """

    curves: tuple[BeliefCurve, ...]
    log_weights: np.ndarray
    noise_sigma: float
    domain: tuple[float, float]
    optima: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.curves) < 2:
            raise ValueError("an ensemble needs at least two curves")
        if not self.noise_sigma > 0:
            raise ValueError("noise_sigma must be positive")
        lw = np.asarray(self.log_weights, dtype=float)
        if lw.shape != (len(self.curves),):
            raise ValueError("log_weights must have one entry per curve")
        object.__setattr__(self, "log_weights", lw - logsumexp(lw))
        object.__setattr__(self, "curves", tuple(self.curves))
        object.__setattr__(
            self, "optima", np.array([c.argmax_location for c in self.curves])
        )

    @classmethod
    def uniform(cls, curves, noise_sigma, domain, distinct=True) -> "BeliefEnsemble":
        curves = tuple(curves)
        if distinct:
            check_distinct_optima([c.argmax_location for c in curves], domain)
        k = len(curves)
        return cls(curves, np.full(k, -math.log(k)), float(noise_sigma), tuple(domain))

    @property
    def K(self) -> int:
        return len(self.curves)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def values(self, x) -> np.ndarray:
        """Curve values at ``x``, shape ``(K, len(x))``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.vstack([np.asarray(c.evaluate(x), dtype=float) for c in self.curves])

    def with_sigma(self, sigma) -> "BeliefEnsemble":
        return replace(self, noise_sigma=float(sigma))

    def summary(self) -> tuple[int, float]:
        """(index, weight) of the most probable curve."""
        k = int(np.argmax(self.log_weights))
        return k, float(np.exp(self.log_weights[k]))


def check_distinct_optima(optima, domain):
    """Reject maximizers closer than numerical maximization can resolve.

    Refined maximizers are accurate to roughly the square root of machine
    precision, so the spacing threshold is ``1e-7 * (b - a)`` rather than
    the breakpoint merge tolerance.
    """
    a, b = domain
    delta = _OPTIMA_SPACING * (b - a)
    xs = np.sort(np.asarray(optima, dtype=float))
    if xs.size > 1 and np.min(np.diff(xs)) < delta:
        raise ValueError("belief curves must have pairwise distinct maximizers")


def _check_in_domain(ensemble: BeliefEnsemble, x):
    a, b = ensemble.domain
    x = np.asarray(x, dtype=float)
    if np.any(x < a) or np.any(x > b) or not np.all(np.isfinite(x)):
        raise ValueError(f"point(s) {x} outside domain [{a}, {b}]")


def update_weights(ensemble: BeliefEnsemble, x, observed) -> BeliefEnsemble:
    """Bayes update of the curve weights after observing ``observed`` at ``x``."""
    _check_in_domain(ensemble, x)
    observed = float(observed)
    if not math.isfinite(observed):
        raise ValueError("observation must be finite")
    fx = ensemble.values([x])[:, 0]
    resid = observed - fx
    lw = ensemble.log_weights - resid * resid / (2.0 * ensemble.noise_sigma**2)
    # log-space renormalization survives total underflow of the likelihoods
    return replace(ensemble, log_weights=lw)


# ---------------------------------------------------------------------------
# probability of correct region assignment
# ---------------------------------------------------------------------------


def _phi_ratio(diff, sigma):
    if sigma == 0:
        return np.where(diff > 0, 1.0, np.where(diff < 0, 0.0, 0.5))
    return ndtr(diff / (math.sqrt(2.0) * sigma))


def g_single(curve: BeliefCurve, x, y, sigma) -> float:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    fx, fy = curve.evaluate(np.array([x, y], dtype=float))
    return float(_phi_ratio(abs(fx - fy), sigma))


def comparison_probabilities(ensemble: BeliefEnsemble, xs, ys, fx=None, fy=None):
    """Vectorized ``(g, g_bar)`` over all pairs ``xs[i], ys[j]``.

    ``fx`` / ``fy`` may carry precomputed curve values of shape ``(K, n)``.
    Both outputs have shape ``(len(xs), len(ys))`` and are clamped to
    ``[PROB_EPS, 1 - PROB_EPS]``.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    fx = ensemble.values(xs) if fx is None else fx
    fy = ensemble.values(ys) if fy is None else fy
    w = ensemble.weights
    sigma = ensemble.noise_sigma

    diff = fx[:, :, None] - fy[:, None, :]  # K, A, B
    gk = _phi_ratio(np.abs(diff), sigma)
    g = np.tensordot(w, gk, axes=1)

    x_left = xs[:, None] <= ys[None, :]
    lo = np.where(x_left, xs[:, None], ys[None, :])
    hi = np.where(x_left, ys[None, :], xs[:, None])
    opt = ensemble.optima[:, None, None]
    inside = (opt > lo) & (opt < hi)
    # P(f_hat(x_l) > f_hat(x_r)) per curve
    diff_lr = np.where(x_left[None], diff, -diff)
    gk_bar = _phi_ratio(diff_lr, sigma)
    w_in = w[:, None, None] * inside
    mass = w_in.sum(axis=0)
    num = (w_in * gk_bar).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        gbar = np.where(mass > 0, num / np.where(mass > 0, mass, 1.0), 0.5)

    return (
        np.clip(g, PROB_EPS, 1.0 - PROB_EPS),
        np.clip(gbar, PROB_EPS, 1.0 - PROB_EPS),
    )


def g_mixture(ensemble: BeliefEnsemble, x, y) -> float:
    g, _ = comparison_probabilities(ensemble, [x], [y])
    return float(g[0, 0])


def g_bar(ensemble: BeliefEnsemble, x_l, x_r) -> float:
    if not x_l < x_r:
        raise ValueError("g_bar requires x_l < x_r")
    _, gb = comparison_probabilities(ensemble, [x_l], [x_r])
    return float(gb[0, 0])


# ---------------------------------------------------------------------------
# parametric family specs
# ---------------------------------------------------------------------------


@dataclass
class ParametricFamilySpec:
    """A grid of parameter tuples for one family, optionally crossed with scales.

    ``parameter_grid`` entries are the positional parameters of the family
    function (e.g. ``(mu, sd)`` for ``gaussian-pdf``).  For ``tabulated``
    each entry is a CSV path or an ``(xs, ys)`` pair.
    """

    family: str
    parameter_grid: list
    scale_grid: list | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES and self.family != "tabulated":
            raise ValueError(f"unknown family {self.family!r}")
        if self.scale_grid is not None and any(s <= 0 for s in self.scale_grid):
            raise ValueError("scales must be positive")

    @property
    def size(self) -> int:
        return len(self.parameter_grid) * len(self.scale_grid or [1.0])

    def curves(self, domain) -> list[BeliefCurve]:
        out = []
        for params in self.parameter_grid:
            for scale in self.scale_grid or [1.0]:
                if self.family == "tabulated":
                    xs, ys = load_tabulated(params) if isinstance(params, (str, Path)) else params
                    fn = functools.partial(_tabulated, xs=np.asarray(xs), ys=np.asarray(ys), scale=scale)
                    label = f"tabulated[{params if isinstance(params, (str, Path)) else len(out)}]x{scale:g}"
                else:
                    fn = FamilyMember(_FAMILIES[self.family], tuple(params), scale)
                    label = f"{self.family}{tuple(params)}x{scale:g}"
                out.append(BeliefCurve.from_function(label, fn, domain))
        return out

    def ensemble(self, domain, noise_sigma) -> BeliefEnsemble:
        # scale copies share maximizers, so distinctness only applies without a scale grid
        return BeliefEnsemble.uniform(
            self.curves(domain), noise_sigma, domain, distinct=self.scale_grid is None
        )

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "parameter_grid": [list(p) if not isinstance(p, str) else p for p in self.parameter_grid],
            "scale_grid": self.scale_grid,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParametricFamilySpec":
        grid = [p if isinstance(p, str) else tuple(p) for p in d["parameter_grid"]]
        return cls(d["family"], grid, d.get("scale_grid"))

    @classmethod
    def load(cls, path) -> "ParametricFamilySpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def curves_from_table(xs: Sequence[float], table: np.ndarray, optima_idx: Sequence[int]):
    """Tabulated curves on a finite grid with maximizers pinned to grid points."""
    xs = np.asarray(xs, dtype=float)
    curves = []
    for k, (row, i) in enumerate(zip(np.asarray(table, dtype=float), optima_idx)):
        if int(np.argmax(row)) != int(i):
            raise ValueError(f"row {k} does not peak at grid index {i}")
        fn = functools.partial(_tabulated, xs=xs, ys=row)
        curves.append(BeliefCurve(f"table[{k}]", fn, float(xs[i])))
    return curves
