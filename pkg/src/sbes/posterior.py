"""Exact piecewise-constant density for the location of the maximizer.

Every comparison update multiplies three contiguous regions by constant
factors, so a piecewise-constant density stays closed under updates and
its CDF, entropy and inverse CDF are all available in closed form.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PiecewiseDensity",
    "ComparisonOutcome",
    "DegenerateUpdateError",
    "PosteriorInvariantError",
    "MASS_TOL",
    "region_factors",
    "normalizers",
]

MASS_TOL = 1e-9
_MIN_NORMALIZER = 1e-300
_MAX_DRAW_ATTEMPTS = 100


class DegenerateUpdateError(FloatingPointError):
    pass


class PosteriorInvariantError(AssertionError):
    """Raised when an update leaves mass off one or produces a negative density."""


@dataclass(frozen=True)
class ComparisonOutcome:
    """Result of comparing the observations at ``x_l < x_r``.

    ``y_hat`` is 1 when ``f_hat(x_l) <= f_hat(x_r)``.
    """

    y_hat: int
    x_l: float
    x_r: float

    def __post_init__(self):
        if not self.x_l < self.x_r:
            raise ValueError("ComparisonOutcome needs x_l < x_r")
        if self.y_hat not in (0, 1):
            raise ValueError("y_hat must be 0 or 1")

    @classmethod
    def from_observations(cls, x, fx, y, fy) -> "ComparisonOutcome":
        (xl, fl), (xr, fr) = sorted([(x, fx), (y, fy)])
        return cls(int(fl <= fr), xl, xr)


def region_factors(y_hat: int, g: float, gbar: float) -> tuple[float, float, float]:
    """Likelihood of ``y_hat`` given the maximizer lies left / between / right."""
    if y_hat == 1:
        return 1.0 - g, 1.0 - gbar, g
    return g, gbar, 1.0 - g


def normalizers(left_mass, mid_mass, g, gbar):
    """Predictive probabilities ``(U1, U0)`` of the two outcomes.

    Broadcasts over array inputs; ``U1 + U0 = 1`` whenever the three region
    masses sum to one.
    """
    left_mass = np.asarray(left_mass, dtype=float)
    mid_mass = np.asarray(mid_mass, dtype=float)
    right_mass = 1.0 - left_mass - mid_mass
    u1 = (1.0 - g) * left_mass + (1.0 - gbar) * mid_mass + g * right_mass
    u0 = g * left_mass + gbar * mid_mass + (1.0 - g) * right_mass
    return u1, u0


class PiecewiseDensity:
    """Density on ``[a, b]`` constant between consecutive ``edges``.

    Parameters
    ----------
    edges : array_like
        Strictly increasing, ``edges[0] = a`` and ``edges[-1] = b``.
    densities : array_like
        One nonnegative value per interval.
    """

    __slots__ = ("edges", "densities", "_cum")

    def __init__(self, edges, densities):
        edges = np.asarray(edges, dtype=float)
        densities = np.asarray(densities, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be strictly increasing with at least two entries")
        if densities.shape != (edges.size - 1,):
            raise ValueError("need exactly one density per interval")
        if np.any(densities < 0) or not np.all(np.isfinite(densities)):
            raise ValueError("densities must be finite and nonnegative")
        self.edges = edges
        self.densities = densities
        self._cum = np.concatenate(([0.0], np.cumsum(self.masses)))

    # -- constructors -----------------------------------------------------

    @classmethod
    def uniform(cls, a, b) -> "PiecewiseDensity":
        a, b = float(a), float(b)
        if not b > a:
            raise ValueError("need a < b")
        return cls([a, b], [1.0 / (b - a)])

    @classmethod
    def discrete(cls, masses) -> "PiecewiseDensity":
        """Unit-length cells centred on the integers ``0 .. n-1``.

        Differential entropy on unit cells equals the Shannon entropy of
        the probability mass function.
        """
        masses = np.asarray(masses, dtype=float)
        n = masses.size
        return cls(np.arange(n + 1) - 0.5, masses / masses.sum())

    # -- basic views ------------------------------------------------------

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.edges[0]), float(self.edges[-1])

    @property
    def breakpoints(self) -> np.ndarray:
        return self.edges[1:-1]

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def masses(self) -> np.ndarray:
        return self.densities * self.lengths

    @property
    def total_mass(self) -> float:
        return float(self._cum[-1])

    @property
    def delta(self) -> float:
        """Merge tolerance for breakpoints."""
        a, b = self.domain
        return 1e-9 * (b - a)

    def __repr__(self):
        return f"PiecewiseDensity(edges={self.edges!r}, densities={self.densities!r})"

    # -- queries ----------------------------------------------------------

    def cdf(self, x):
        """Exact integral of the density from ``a`` to ``x``."""
        a, b = self.domain
        xa = np.asarray(x, dtype=float)
        if np.any(xa < a) or np.any(xa > b):
            raise ValueError(f"x outside [{a}, {b}]")
        idx = np.clip(np.searchsorted(self.edges, xa, side="right") - 1, 0, self.densities.size - 1)
        out = self._cum[idx] + self.densities[idx] * (xa - self.edges[idx])
        out = np.minimum(out, self._cum[-1])
        return float(out) if out.ndim == 0 else out

    def ppf(self, u):
        """Inverse CDF, linear within each interval."""
        ua = np.asarray(u, dtype=float)
        pos = np.flatnonzero(self.masses > 0)
        idx = np.searchsorted(self._cum[1:], ua, side="right")
        # snap onto an interval that actually carries mass
        j = np.searchsorted(pos, idx, side="left")
        idx = pos[np.clip(j, 0, pos.size - 1)]
        x = self.edges[idx] + (ua - self._cum[idx]) / self.densities[idx]
        x = np.clip(x, self.edges[idx], self.edges[idx + 1])
        return float(x) if x.ndim == 0 else x

    def pdf(self, x):
        xa = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, xa, side="right") - 1, 0, self.densities.size - 1)
        return self.densities[idx]

    def entropy_bits(self) -> float:
        d = self.densities
        pos = d > 0
        return float(-np.sum(self.masses[pos] * np.log2(d[pos])))

    def kl_to_uniform(self) -> float:
        a, b = self.domain
        return math.log2(b - a) - self.entropy_bits()

    def recommend(self) -> float:
        """Midpoint of the highest-density interval.

        Ties (relative 1e-12) go to the interval with more mass, then the
        leftmost one.
        """
        d = self.densities
        top = d.max()
        tied = np.flatnonzero(d >= top * (1.0 - 1e-12))
        m = self.masses[tied]
        best = tied[np.flatnonzero(m >= m.max() * (1.0 - 1e-12))[0]]
        return float(0.5 * (self.edges[best] + self.edges[best + 1]))

    def region_masses(self, left_cut, right_cut):
        """Masses left of ``left_cut`` and between the two cuts."""
        fl = self.cdf(left_cut)
        return fl, self.cdf(right_cut) - fl

    # -- sampling ---------------------------------------------------------

    def sample(self, count: int, rng: np.random.Generator, exclude=()) -> np.ndarray:
        """Inverse-CDF draws, kept at least ``delta`` apart from each other and ``exclude``.

        Colliding draws are re-drawn up to 100 times; a draw still colliding
        after that is nudged by ``delta`` and accepted.
        """
        if count < 1:
            raise ValueError("count must be >= 1")
        delta = self.delta
        taken = list(np.asarray(exclude, dtype=float).ravel())
        out = []
        for _ in range(count):
            x = self.ppf(rng.random())
            for _ in range(_MAX_DRAW_ATTEMPTS):
                if not _collides(x, taken, delta):
                    break
                x = self.ppf(rng.random())
            else:
                x = _jitter(x, taken, delta, self.domain)
            taken.append(x)
            out.append(x)
        return np.asarray(out)

    # -- updates ----------------------------------------------------------

    def refine(self, x) -> tuple["PiecewiseDensity", int]:
        """Insert a breakpoint at ``x`` (merging within ``delta``) and return its edge index."""
        a, b = self.domain
        if not a <= x <= b:
            raise ValueError(f"breakpoint {x} outside [{a}, {b}]")
        j = int(np.argmin(np.abs(self.edges - x)))
        if abs(self.edges[j] - x) <= self.delta:
            return self, j
        i = int(np.searchsorted(self.edges, x)) - 1
        edges = np.insert(self.edges, i + 1, x)
        dens = np.insert(self.densities, i, self.densities[i])
        return PiecewiseDensity(edges, dens), i + 1

    def reweight(self, left_cut, right_cut, y_hat, g, gbar) -> "PiecewiseDensity":
        """Apply a comparison outcome with explicit region cuts.

        Mass at or below ``left_cut`` forms the left region, mass at or
        above ``right_cut`` the right region.  ``left_cut == right_cut``
        gives an empty middle region (adjacent points on a finite grid).
        """
        if not (0.0 < g < 1.0 and 0.0 < gbar < 1.0):
            raise ValueError("g and g_bar must lie strictly inside (0, 1)")
        if left_cut > right_cut:
            raise ValueError("left_cut must not exceed right_cut")
        p, il = self.refine(left_cut)
        p, ir = p.refine(right_cut)
        il = min(il, ir)
        c_left, c_mid, c_right = region_factors(y_hat, g, gbar)
        masses = p.masses
        m_left = masses[:il].sum()
        m_mid = masses[il:ir].sum()
        m_right = masses[ir:].sum()
        norm = c_left * m_left + c_mid * m_mid + c_right * m_right
        if not norm >= _MIN_NORMALIZER:
            raise DegenerateUpdateError(f"normalizer {norm!r} below {_MIN_NORMALIZER}")
        factors = np.empty_like(p.densities)
        factors[:il] = c_left
        factors[il:ir] = c_mid
        factors[ir:] = c_right
        out = PiecewiseDensity(p.edges, p.densities * factors / norm)
        out.check()
        return out

    def update(self, outcome: ComparisonOutcome, g, gbar) -> "PiecewiseDensity":
        return self.reweight(outcome.x_l, outcome.x_r, outcome.y_hat, g, gbar)

    def check(self):
        if np.any(self.densities < 0):
            raise PosteriorInvariantError("negative density")
        if abs(self.total_mass - 1.0) > MASS_TOL:
            raise PosteriorInvariantError(f"total mass {self.total_mass!r} != 1")

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "domain": list(self.domain),
            "breakpoints": self.breakpoints.tolist(),
            "densities": self.densities.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewiseDensity":
        a, b = d["domain"]
        return cls([a, *d["breakpoints"], b], d["densities"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _collides(x, taken, delta):
    return any(abs(x - t) < delta for t in taken)


def _jitter(x, taken, delta, domain):
    a, b = domain
    for step in range(1, 1000):
        for cand in (x + step * delta, x - step * delta):
            if a <= cand <= b and not _collides(cand, taken, delta):
                return cand
    raise RuntimeError("no room left to place a sample")
