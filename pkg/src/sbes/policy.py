"""One-step lookahead entropy search over pairs (history point, new point).

The acquisition value of a pair is the expected change in the entropy of
the maximizer's posterior after comparing the two observations; the
policy picks the pair with the most negative value among the history
points crossed with ``m`` candidates drawn from the posterior.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .belief import BeliefEnsemble, comparison_probabilities, update_weights
from .posterior import ComparisonOutcome, PiecewiseDensity, normalizers

__all__ = [
    "NU_TOL",
    "SearchState",
    "Decision",
    "AcquisitionValue",
    "TraceRecord",
    "SbesConfig",
    "InformationViolation",
    "NoValidCandidate",
    "expected_entropy_change",
    "acquisition_nu",
    "acquisition_matrix",
    "propose",
    "step",
    "initialize",
    "optimize",
]

log = logging.getLogger(__name__)

NU_TOL = 1e-9
DEFAULT_M = 20
GOLDEN_INIT = (0.382, 0.618)


class InformationViolation(AssertionError):
    """An evaluated pair predicted an expected entropy increase."""


class NoValidCandidate(RuntimeError):
    pass


def _xlog2x(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)


def _neg_binary_entropy(p):
    return _xlog2x(p) + _xlog2x(1.0 - p)


def expected_entropy_change(left_mass, mid_mass, g, gbar):
    """Closed-form expected entropy change (bits) of a comparison.

    ``left_mass`` is the posterior mass at or below ``x_l`` and
    ``mid_mass`` the mass strictly between ``x_l`` and ``x_r``.
    """
    mid_mass = np.asarray(mid_mass, dtype=float)
    u1, u0 = normalizers(left_mass, mid_mass, g, gbar)
    return (
        _neg_binary_entropy(g) * (mid_mass - 1.0)
        - _neg_binary_entropy(gbar) * mid_mass
        + _xlog2x(u1)
        + _xlog2x(u0)
    )


@dataclass(frozen=True)
class Decision:
    h: float
    z: float

    @property
    def x_l(self) -> float:
        return min(self.h, self.z)

    @property
    def x_r(self) -> float:
        return max(self.h, self.z)


@dataclass(frozen=True)
class AcquisitionValue:
    decision: Decision
    nu: float


@dataclass(frozen=True, eq=False)
class SearchState:
    """Full search state: posterior, history, and belief ensemble.

    With ``grid`` set the domain is the finite set of grid points and the
    posterior lives on unit cells indexed ``0 .. len(grid)-1``.
    """

    posterior: PiecewiseDensity
    history_points: np.ndarray
    history_values: np.ndarray
    ensemble: BeliefEnsemble
    iteration: int = 0
    evaluations_used: int = 0
    grid: np.ndarray | None = None
    history_curves: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        hp = np.asarray(self.history_points, dtype=float)
        hv = np.asarray(self.history_values, dtype=float)
        if hp.shape != hv.shape:
            raise ValueError("history points and values differ in length")
        object.__setattr__(self, "history_points", hp)
        object.__setattr__(self, "history_values", hv)
        if self.history_curves is None:
            hc = self.ensemble.values(hp) if hp.size else np.zeros((self.ensemble.K, 0))
            object.__setattr__(self, "history_curves", hc)

    @property
    def domain(self) -> tuple[float, float]:
        if self.grid is not None:
            return float(self.grid[0]), float(self.grid[-1])
        return self.posterior.domain

    @property
    def delta(self) -> float:
        a, b = self.domain
        return 1e-9 * (b - a)

    def history_index(self, x) -> int | None:
        if self.history_points.size == 0:
            return None
        j = int(np.argmin(np.abs(self.history_points - x)))
        return j if abs(self.history_points[j] - x) < self.delta else None

    def grid_index(self, x):
        return np.searchsorted(self.grid, np.asarray(x) - self.delta)

    def region_cuts(self, x_l, x_r):
        """Cut positions in posterior coordinates for the pair ``x_l < x_r``."""
        if self.grid is None:
            return np.asarray(x_l, dtype=float), np.asarray(x_r, dtype=float)
        return self.grid_index(x_l) + 0.5, self.grid_index(x_r) - 0.5

    def recommend(self) -> float:
        r = self.posterior.recommend()
        if self.grid is not None:
            return float(self.grid[int(round(r))])
        return r


def acquisition_matrix(state: SearchState, h_points, z_points, fh=None, fz=None):
    """Acquisition values for every (h, z) pair, shape ``(len(h), len(z))``."""
    h = np.atleast_1d(np.asarray(h_points, dtype=float))
    z = np.atleast_1d(np.asarray(z_points, dtype=float))
    g, gbar = comparison_probabilities(state.ensemble, h, z, fh, fz)
    x_l = np.minimum(h[:, None], z[None, :])
    x_r = np.maximum(h[:, None], z[None, :])
    cut_l, cut_r = state.region_cuts(x_l, x_r)
    f_l = state.posterior.cdf(cut_l)
    f_r = state.posterior.cdf(np.maximum(cut_r, cut_l))
    return expected_entropy_change(f_l, f_r - f_l, g, gbar)


def acquisition_nu(state: SearchState, h, z) -> float:
    """Expected one-step entropy change (bits) for comparing ``h`` with a new ``z``."""
    if abs(h - z) < state.delta:
        raise ValueError("h and z must be distinct")
    return float(acquisition_matrix(state, [h], [z])[0, 0])


def _candidates(state: SearchState, m: int, rng):
    if state.grid is None:
        z = state.posterior.sample(m, rng, exclude=state.history_points)
        return np.unique(z)
    free = np.setdiff1d(np.arange(state.grid.size), state.grid_index(state.history_points))
    if free.size == 0:
        raise NoValidCandidate("every grid point has already been evaluated")
    masses = state.posterior.masses[free]
    probs = masses / masses.sum() if masses.sum() > 0 else None
    picks = rng.choice(free, size=min(m, free.size), replace=False, p=probs)
    return state.grid[np.sort(picks)]


def _select(state: SearchState, m: int, rng, candidates=None) -> AcquisitionValue:
    if state.history_points.size < 1:
        raise ValueError("propose needs at least one history point")
    if m < 1:
        raise ValueError("m must be >= 1")
    if candidates is None:
        z = _candidates(state, m, rng)
    else:
        z = np.unique(np.asarray(candidates, dtype=float))
    if state.history_points.size:
        clash = np.min(np.abs(z[:, None] - state.history_points[None, :]), axis=1) < state.delta
        z = z[~clash]
    if z.size == 0:
        raise NoValidCandidate("no candidate point is distinct from the history")

    order_h = np.argsort(state.history_points, kind="stable")
    h = state.history_points[order_h]
    fh = state.history_curves[:, order_h]
    nu = acquisition_matrix(state, h, z, fh=fh)  # (H, Z), both ascending
    worst = float(nu.max())
    if worst > NU_TOL:
        log.error("acquisition value %.3e exceeds tolerance", worst)
        raise InformationViolation(f"nu = {worst!r} > {NU_TOL}")
    # z-major flattening: ties resolve to smaller z, then smaller h
    flat = int(np.argmin(nu.T))
    iz, ih = divmod(flat, h.size)
    return AcquisitionValue(Decision(float(h[ih]), float(z[iz])), float(nu[ih, iz]))


def propose(state: SearchState, m: int = DEFAULT_M, rng=None, candidates=None) -> Decision:
    """Pick the (history, candidate) pair with the smallest acquisition value.

    ``candidates`` replaces posterior sampling (full enumeration on a grid).
    """
    rng = np.random.default_rng(rng)
    return _select(state, m, rng, candidates).decision


def _compare_and_update(state: SearchState, x_l, x_r, y_hat, fl=None, fr=None):
    g, gbar = comparison_probabilities(state.ensemble, [x_l], [x_r], fl, fr)
    cut_l, cut_r = state.region_cuts(x_l, x_r)
    return state.posterior.reweight(float(cut_l), float(cut_r), y_hat, float(g[0, 0]), float(gbar[0, 0]))


def step(state: SearchState, decision: Decision, observed_z: float) -> SearchState:
    """Transition after evaluating ``decision.z``."""
    ih = state.history_index(decision.h)
    if ih is None:
        raise ValueError(f"h={decision.h} is not a history point")
    if state.history_index(decision.z) is not None:
        raise ValueError(f"z={decision.z} was already evaluated")
    a, b = state.domain
    if not a <= decision.z <= b:
        raise ValueError(f"z={decision.z} outside domain")
    if state.grid is not None and abs(state.grid[state.grid_index(decision.z)] - decision.z) > state.delta:
        raise ValueError(f"z={decision.z} is not a grid point")

    f_h = state.history_values[ih]
    fz_curves = state.ensemble.values([decision.z])
    fh_curves = state.history_curves[:, [ih]]
    if decision.h < decision.z:
        y_hat = int(f_h <= observed_z)
        post = _compare_and_update(state, decision.h, decision.z, y_hat, fh_curves, fz_curves)
    else:
        y_hat = int(observed_z <= f_h)
        post = _compare_and_update(state, decision.z, decision.h, y_hat, fz_curves, fh_curves)

    return SearchState(
        posterior=post,
        history_points=np.append(state.history_points, decision.z),
        history_values=np.append(state.history_values, observed_z),
        ensemble=update_weights(state.ensemble, decision.z, observed_z),
        iteration=state.iteration + 1,
        evaluations_used=state.evaluations_used + 1,
        grid=state.grid,
        history_curves=np.hstack([state.history_curves, fz_curves]),
    )


def last_outcome(state: SearchState, decision: Decision) -> int:
    """``y_hat`` of the most recent comparison in ``state``."""
    fh = state.history_values[state.history_index(decision.h)]
    fz = state.history_values[state.history_index(decision.z)]
    return ComparisonOutcome.from_observations(decision.h, fh, decision.z, fz).y_hat


def default_x0(domain, grid=None):
    a, b = domain
    if grid is not None:
        n = len(grid)
        i, j = (int(round(f * (n - 1))) for f in GOLDEN_INIT)
        j = max(j, i + 1)
        return float(grid[i]), float(grid[j])
    return a + GOLDEN_INIT[0] * (b - a), a + GOLDEN_INIT[1] * (b - a)


def initialize(domain, ensemble: BeliefEnsemble, evaluator: Callable[[float], float],
               x0_pair=None, grid=None) -> SearchState:
    """Evaluate the initial pair and return the state at iteration 1."""
    grid = None if grid is None else np.asarray(grid, dtype=float)
    x0 = default_x0(domain, grid) if x0_pair is None else tuple(map(float, x0_pair))
    a, b = (float(grid[0]), float(grid[-1])) if grid is not None else map(float, domain)
    if abs(x0[0] - x0[1]) < 1e-9 * (b - a):
        raise ValueError("initial points must be distinct")
    if not all(a <= x <= b for x in x0):
        raise ValueError("initial points must lie in the domain")
    x_l, x_r = sorted(x0)
    f_l, f_r = float(evaluator(x_l)), float(evaluator(x_r))

    prior = PiecewiseDensity.discrete(np.ones(grid.size)) if grid is not None else PiecewiseDensity.uniform(a, b)
    state = SearchState(prior, np.array([]), np.array([]), ensemble, grid=grid)
    post = _compare_and_update(state, x_l, x_r, int(f_l <= f_r))
    ens = update_weights(update_weights(ensemble, x_l, f_l), x_r, f_r)
    return SearchState(post, np.array([x_l, x_r]), np.array([f_l, f_r]), ens,
                       iteration=1, evaluations_used=2, grid=grid)


@dataclass(frozen=True)
class TraceRecord:
    n: int
    h: float
    z: float
    y_hat: int
    nu_bits: float
    entropy_bits: float
    kl_bits: float
    recommend: float
    top_curve: int
    top_weight: float


@dataclass
class SbesConfig:
    """Settings for one optimization run.

    ``budget`` counts iterations: the first consumes two evaluations and
    each later one a single evaluation, so ``budget + 1`` evaluations total.
    """

    domain: tuple[float, float]
    ensemble: BeliefEnsemble
    budget: int = 30
    m: int = DEFAULT_M
    seed: int | np.random.SeedSequence | None = 0
    x0: tuple[float, float] | None = None
    grid: np.ndarray | None = None


def _record(state, n, decision, nu):
    top, w = state.ensemble.summary()
    return TraceRecord(
        n=n, h=decision.h, z=decision.z, y_hat=last_outcome(state, decision), nu_bits=nu,
        entropy_bits=state.posterior.entropy_bits(), kl_bits=state.posterior.kl_to_uniform(),
        recommend=state.recommend(), top_curve=top, top_weight=w,
    )


def optimize(evaluator: Callable[[float], float], config: SbesConfig, on_iteration=None):
    """Run the full search; return ``(recommendation, trace)``.

    ``on_iteration(state)`` is called after every transition.
    """
    if config.budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(config.seed)
    grid = None if config.grid is None else np.asarray(config.grid, dtype=float)
    x0 = config.x0 or default_x0(config.domain, grid)
    a, b = sorted(x0)
    prior = PiecewiseDensity.discrete(np.ones(grid.size)) if grid is not None else PiecewiseDensity.uniform(*config.domain)
    nu0 = float(acquisition_matrix(SearchState(prior, [], [], config.ensemble, grid=grid), [a], [b])[0, 0])
    state = initialize(config.domain, config.ensemble, evaluator, x0_pair=x0, grid=grid)
    trace = [_record(state, 1, Decision(a, b), nu0)]
    if on_iteration:
        on_iteration(state)
    for n in range(2, config.budget + 1):
        choice = _select(state, config.m, rng)
        d = choice.decision
        state = step(state, d, float(evaluator(d.z)))
        trace.append(_record(state, n, d, choice.nu))
        if on_iteration:
            on_iteration(state)
    return state.recommend(), trace


def run_state(evaluator, config: SbesConfig) -> SearchState:
    """Like :func:`optimize` but return the final state."""
    final = []
    optimize(evaluator, config, on_iteration=final.append)
    return final[-1]
