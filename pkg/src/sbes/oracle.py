"""Brute-force information checks on small finite instances.

Everything here enumerates the joint distribution of (curve index,
comparison outcome) directly, so it shares no arithmetic with the
closed-form acquisition in :mod:`sbes.policy`.  On a finite grid each
curve's maximizer is a grid point and the maximizer's posterior is the
push-forward of the curve weights, which makes the two views comparable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .belief import BeliefEnsemble, curves_from_table, g_bar, g_mixture
from .policy import Decision, SearchState, acquisition_matrix, propose
from .posterior import PiecewiseDensity

__all__ = [
    "FiniteInstance",
    "MutualInfoReport",
    "random_instance",
    "predictive_mi",
    "perfect_mi",
    "exhaustive_optimal_policy",
    "check_predictive_optimal",
    "check_perfect_bound",
    "run_suite",
    "format_table",
]

TOL = 1e-9
LN2 = math.log(2.0)


def _entropy_bits(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def _h2(q) -> float:
    return _entropy_bits([q, 1.0 - q])


@dataclass(frozen=True, eq=False)
class FiniteInstance:
    """Finite grid, tabulated belief curves, the index of the true curve,
    and the quantizer cells (grid indices) owning each curve's maximizer."""

    grid: np.ndarray
    ensemble: BeliefEnsemble
    truth: int
    partition: tuple[np.ndarray, ...]

    def __post_init__(self):
        opt_idx = self.optimum_indices
        cells = [set(c.tolist()) for c in self.partition]
        if len(cells) != self.ensemble.K:
            raise ValueError("need one partition cell per curve")
        union = set().union(*cells)
        if sum(len(c) for c in cells) != len(union):
            raise ValueError("partition cells overlap")
        if not all(i in c for i, c in zip(opt_idx, cells)):
            raise ValueError("each cell must contain its curve's maximizer")
        if not 0 <= self.truth < self.ensemble.K:
            raise ValueError("truth index out of range")

    @property
    def optimum_indices(self) -> np.ndarray:
        return np.searchsorted(self.grid, self.ensemble.optima - 1e-9)

    def state(self, weights=None, history_idx=(0, -1), history_values=None) -> SearchState:
        """Search state whose maximizer posterior is the push-forward of ``weights``."""
        ens = self.ensemble
        if weights is not None:
            w = np.asarray(weights, dtype=float)
            with np.errstate(divide="ignore"):
                ens = BeliefEnsemble(ens.curves, np.log(w / w.sum()), ens.noise_sigma, ens.domain)
        cells = np.zeros(self.grid.size)
        cells[self.optimum_indices] = ens.weights
        hp = self.grid[np.asarray(history_idx)]
        if history_values is None:
            history_values = ens.values(hp)[self.truth]
        return SearchState(
            PiecewiseDensity.discrete(cells), np.sort(hp), np.asarray(history_values)[np.argsort(hp)],
            ens, iteration=1, evaluations_used=len(hp), grid=self.grid,
        )

    def pairs(self, state: SearchState):
        free = [x for x in self.grid if state.history_index(x) is None]
        return [(h, z) for h in state.history_points for z in free]


@dataclass(frozen=True)
class MutualInfoReport:
    predictive: float  # bits, at the SBES decision
    perfect: float  # bits, at the SBES decision
    kl_to_truth: float  # nats
    bound_rhs: float  # nats
    perfect_optimal: float = float("nan")  # bits, at the perfect-information decision
    l1_distance: float = float("nan")


def _outcome_likelihoods(instance: FiniteInstance, state: SearchState, decision: Decision):
    """P(y_hat = 1 | curve k) for each k, using the truth-table assignment."""
    x_l, x_r = decision.x_l, decision.x_r
    g = g_mixture(state.ensemble, x_l, x_r)
    gb = g_bar(state.ensemble, x_l, x_r)
    lik = []
    for x_star in state.ensemble.optima:
        if x_star <= x_l:
            lik.append(1.0 - g)
        elif x_star >= x_r:
            lik.append(g)
        else:
            lik.append(1.0 - gb)
    return np.asarray(lik)


def _posterior_entropies(p, lik1):
    """Entropy of the maximizer's posterior after each outcome, and P(y_hat=1)."""
    out = {}
    for y, lik in ((1, lik1), (0, 1.0 - lik1)):
        joint = p * lik
        py = joint.sum()
        out[y] = (py, _entropy_bits(joint / py) if py > 0 else 0.0)
    return out


def predictive_mi(instance: FiniteInstance, state: SearchState, decision: Decision) -> float:
    """Information (bits) between the maximizer and the next outcome under the current weights."""
    p = state.ensemble.weights
    lik1 = _outcome_likelihoods(instance, state, decision)
    post = _posterior_entropies(p, lik1)
    # outer expectation over curves, inner over outcomes given the curve
    expected = 0.0
    for k, pk in enumerate(p):
        expected += pk * (lik1[k] * post[1][1] + (1.0 - lik1[k]) * post[0][1])
    return float(_entropy_bits(p) - expected)


def predictive_mi_dual(instance, state, decision) -> float:
    """Same quantity from the outcome side: H(y_hat) - E_k H(y_hat | k)."""
    p = state.ensemble.weights
    lik1 = _outcome_likelihoods(instance, state, decision)
    return _h2(float(p @ lik1)) - float(sum(pk * _h2(l) for pk, l in zip(p, lik1)))


def perfect_mi(instance: FiniteInstance, state: SearchState, decision: Decision) -> float:
    """Information (bits) the next outcome carries when the true curve is known.

    Uses the outcome-side form ``H(y_hat | S) - H(y_hat | truth)``, the form
    the error bound is derived from.  Unlike the predictive quantity it can
    be negative, since the first term is still computed under the weights.
    """
    p = state.ensemble.weights
    lik1 = _outcome_likelihoods(instance, state, decision)
    return _h2(float(p @ lik1)) - _h2(float(lik1[instance.truth]))


def perfect_mi_posterior_form(instance, state, decision) -> float:
    """The posterior-entropy form of the same definition, with outcomes drawn under the truth.

    Kept for comparison only; it does not satisfy the per-policy L1 step.
    """
    p = state.ensemble.weights
    lik1 = _outcome_likelihoods(instance, state, decision)
    post = _posterior_entropies(p, lik1)
    l_true = lik1[instance.truth]
    return _entropy_bits(p) - (l_true * post[1][1] + (1.0 - l_true) * post[0][1])


def exhaustive_optimal_policy(instance: FiniteInstance, state: SearchState) -> Decision:
    best, best_val = None, -math.inf
    for h, z in instance.pairs(state):
        v = perfect_mi(instance, state, Decision(float(h), float(z)))
        if v > best_val:
            best, best_val = Decision(float(h), float(z)), v
    return best


def sbes_decision(instance: FiniteInstance, state: SearchState) -> Decision:
    free = [x for x in instance.grid if state.history_index(x) is None]
    return propose(state, m=len(free), rng=0, candidates=free)


def predictive_slack(instance: FiniteInstance, state: SearchState) -> float:
    """min over pairs of I_hat(SBES) - I_hat(pair); nonnegative when the lemma holds."""
    ours = predictive_mi(instance, state, sbes_decision(instance, state))
    return min(
        ours - predictive_mi(instance, state, Decision(float(h), float(z)))
        for h, z in instance.pairs(state)
    )


def check_predictive_optimal(instance: FiniteInstance, state: SearchState) -> bool:
    return predictive_slack(instance, state) >= -TOL


def check_perfect_bound(instance: FiniteInstance, state: SearchState):
    """Theorem bound, corollary floor and the per-policy L1 step.

    Returns ``(report, ok)``.  A zero truth weight makes the bound
    infinite, so every inequality holds vacuously.
    """
    p = state.ensemble.weights
    p_true = p[instance.truth]
    kl = math.inf if p_true == 0 else -math.log(p_true)
    rhs = 4.0 * math.sqrt(2.0 * kl)
    l1 = float(np.abs(p - np.eye(p.size)[instance.truth]).sum())

    d_sbes = sbes_decision(instance, state)
    d_opt = exhaustive_optimal_policy(instance, state)
    i_sbes = perfect_mi(instance, state, d_sbes)
    i_opt = perfect_mi(instance, state, d_opt)
    report = MutualInfoReport(
        predictive=float(predictive_mi(instance, state, d_sbes)), perfect=float(i_sbes),
        kl_to_truth=kl, bound_rhs=rhs, perfect_optimal=float(i_opt), l1_distance=l1,
    )
    checks = theorem_slacks(instance, state, report, d_sbes, d_opt)
    return report, all(v >= -TOL for v in checks.values())


def theorem_slacks(instance, state, report: MutualInfoReport, d_sbes, d_opt) -> dict:
    """Slack (>= 0 when satisfied) of each inequality, in the units it is stated in."""
    if math.isinf(report.kl_to_truth):
        return {"theorem": math.inf, "corollary": math.inf, "l1_sbes": math.inf, "l1_opt": math.inf}
    gap_nats = abs(report.perfect_optimal - report.perfect) * LN2
    floor = max(report.perfect_optimal * LN2 - report.bound_rhs, 0.0)
    l1 = report.l1_distance
    return {
        "theorem": report.bound_rhs - gap_nats,
        "corollary": report.perfect * LN2 - floor,
        "l1_sbes": l1 - abs(report.perfect - report.predictive),
        "l1_opt": l1 - abs(perfect_mi(instance, state, d_opt) - predictive_mi(instance, state, d_opt)),
    }


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------


def _unimodal_row(rng, n, peak):
    rise = np.cumsum(rng.uniform(0.05, 1.0, size=peak))
    fall = np.cumsum(rng.uniform(0.05, 1.0, size=n - peak - 1))
    top = rng.uniform(1.0, 3.0) + max(rise.sum() if rise.size else 0, fall.sum() if fall.size else 0)
    left = top - rise[::-1] if rise.size else np.array([])
    right = top - fall if fall.size else np.array([])
    return np.concatenate([left, [top], right])


def random_instance(rng, max_grid=41, max_k=6) -> FiniteInstance:
    """Random grid, tabulated unimodal curves with distinct peaks, truth and cells."""
    rng = np.random.default_rng(rng)
    n = int(rng.integers(max(5, max_k + 2), max_grid + 1))
    k = int(rng.integers(2, max_k + 1))
    grid = np.sort(rng.uniform(0.0, 10.0, size=n))
    grid = np.round(grid, 6)
    grid = np.unique(grid)
    while grid.size < n:
        grid = np.unique(np.append(grid, np.round(rng.uniform(0, 10), 6)))
    peaks = np.sort(rng.choice(n, size=k, replace=False))
    table = np.vstack([_unimodal_row(rng, n, int(i)) for i in peaks])
    sigma = float(rng.uniform(0.05, 2.0))
    ens = BeliefEnsemble.uniform(curves_from_table(grid, table, peaks), sigma, (grid[0], grid[-1]))
    # Voronoi cells of the peaks in index space
    owner = np.argmin(np.abs(np.arange(n)[:, None] - peaks[None, :]), axis=1)
    partition = tuple(np.flatnonzero(owner == j) for j in range(k))
    return FiniteInstance(grid, ens, int(rng.integers(k)), partition)


def random_state(instance: FiniteInstance, rng) -> SearchState:
    rng = np.random.default_rng(rng)
    k = instance.ensemble.K
    weights = rng.dirichlet(np.full(k, rng.choice([0.3, 1.0, 3.0])))
    weights = np.maximum(weights, 1e-12)
    n_hist = int(rng.integers(1, min(5, instance.grid.size - 1) + 1))
    hist = rng.choice(instance.grid.size, size=n_hist, replace=False)
    vals = instance.ensemble.values(instance.grid[hist])[instance.truth]
    vals = vals + instance.ensemble.noise_sigma * rng.standard_normal(vals.size)
    return instance.state(weights, hist, vals)


def run_suite(n_instances=200, seed=0):
    """Randomized verification; returns ``{name: (passed, total, worst_slack)}``."""
    root = np.random.SeedSequence(seed)
    rows = {k: [0, 0, math.inf] for k in ("identity", "predictive", "theorem", "corollary", "l1_sbes", "l1_opt")}

    def add(name, slack):
        r = rows[name]
        r[0] += int(slack >= -TOL)
        r[1] += 1
        r[2] = min(r[2], float(slack))

    for child in root.spawn(n_instances):
        rng = np.random.default_rng(child)
        inst = random_instance(rng)
        state = random_state(inst, rng)
        d = sbes_decision(inst, state)
        nu = float(acquisition_matrix(state, [d.h], [d.z])[0, 0])
        add("identity", -abs(predictive_mi(inst, state, d) + nu))
        add("predictive", predictive_slack(inst, state))
        report, _ = check_perfect_bound(inst, state)
        d_opt = exhaustive_optimal_policy(inst, state)
        for name, s in theorem_slacks(inst, state, report, d, d_opt).items():
            add(name, s)
    return {k: tuple(v) for k, v in rows.items()}


def format_table(results: dict) -> str:
    """Plain-text pass/fail table for :func:`run_suite` output."""
    lines = [f"{'check':<10} {'passed':>9} {'worst slack':>14}  status"]
    for name, (passed, total, worst) in results.items():
        status = "PASS" if passed == total else "FAIL"
        lines.append(f"{name:<10} {passed:>4}/{total:<4} {worst:>14.6g}  {status}")
    return "\n".join(lines)
