"""Maximum likelihood estimation under a likelihood ratio order.

Two samples ``x ~ F`` and ``y ~ G`` are assumed to satisfy ``G <=_LR F``:
the ordinal dominance curve ``t -> F(G^-(t))`` is convex, equivalently
``dF/dG`` is non-decreasing.  :func:`fit_lro` returns the constrained MLE
of ``F``, ``G`` and the ratio ``theta = dF/dG``.

``theta`` is obtained by isotonic regression of the sample-origin
indicator on the pooled values followed by the odds transform; ``F`` and
``G`` come from the convex minorant / concave majorant of the empirical
CDFs plotted against the pooled CDF.  :func:`theta_via_odc` computes
``theta`` a second way, from the GCM of the empirical ordinal dominance
curve, and is used to cross-check the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateOrderError, InvalidInputError
from .geometry import PiecewiseLinearFn, PointSet, gcm, lcm, left_derivative
from .isotonic import IsotonicFit, pava


def odds(u):
    """Odds transform ``u / (1 - u)``; maps 1 to ``+inf``."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(u >= 1.0, np.inf, u / np.where(u >= 1.0, 1.0, 1.0 - u))
    return float(out) if out.ndim == 0 else out


def inverse_odds(v):
    v = np.asarray(v, dtype=float)
    out = np.where(np.isinf(v), 1.0, v / (1.0 + np.where(np.isinf(v), 0.0, v)))
    return float(out) if out.ndim == 0 else out


def _clean(values, name: str) -> np.ndarray:
    a = np.asarray(values, dtype=float).ravel()
    if len(a) == 0:
        raise InvalidInputError(f"{name}: no observations")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name}: missing or non-finite values")
    return a


@dataclass(frozen=True)
class TwoSample:
    """Independent samples ``x`` (from F) and ``y`` (from G)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _clean(self.x, "x sample")
        y = _clean(self.y, "y sample")
        if y.max() <= x.min():
            raise DegenerateOrderError(
                "largest y value is <= smallest x value; the estimator requires "
                "X_i < Y_j for at least one pair"
            )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n1(self) -> int:
        return len(self.x)

    @property
    def n2(self) -> int:
        return len(self.y)


@dataclass(frozen=True)
class PooledSample:
    """Distinct pooled values with per-value counts by origin."""

    z: np.ndarray
    d_count: np.ndarray
    total_count: np.ndarray
    n1: int
    n2: int

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def pi_n(self) -> float:
        return self.n1 / self.n

    @property
    def y_count(self) -> np.ndarray:
        return self.total_count - self.d_count

    @property
    def proportions(self) -> np.ndarray:
        return self.d_count / self.total_count

    def observations(self) -> tuple[np.ndarray, np.ndarray]:
        """Expand back to ``(Z_i, D_i)`` pairs in sorted order."""
        zs = np.repeat(self.z, self.total_count)
        starts = np.cumsum(self.total_count) - self.total_count
        offset = np.arange(len(zs)) - np.repeat(starts, self.total_count)
        return zs, (offset < np.repeat(self.d_count, self.total_count)).astype(int)


@dataclass(frozen=True)
class StepDistribution:
    """Right-continuous step CDF with jumps only at ``knots``."""

    knots: np.ndarray
    cdf_values: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.cdf_values, dtype=float)
        if k.shape != v.shape or len(k) == 0:
            raise InvalidInputError("knots and cdf_values must be non-empty and match")
        if np.any(np.diff(k) <= 0):
            raise InvalidInputError("knots must be strictly increasing")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "cdf_values", v)

    @property
    def masses(self) -> np.ndarray:
        return np.diff(self.cdf_values, prepend=0.0)

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        idx = np.searchsorted(self.knots, q, side="right")
        out = np.where(idx > 0, self.cdf_values[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if out.ndim == 0 else out

    def mass_at(self, q):
        q = np.asarray(q, dtype=float)
        idx = np.clip(np.searchsorted(self.knots, q, side="left"), 0, len(self.knots) - 1)
        hit = self.knots[idx] == q
        out = np.where(hit, self.masses[idx], 0.0)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MonotoneStepFn:
    """Non-decreasing step function, constant on left-open intervals.

    ``levels[0]`` holds on ``(-inf, breakpoints[0]]``, ``levels[i]`` on
    ``(breakpoints[i-1], breakpoints[i]]`` and ``levels[-1]`` beyond the
    last breakpoint.  Levels may include ``+inf``.
    """

    breakpoints: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        lv = np.asarray(self.levels, dtype=float)
        if len(lv) != len(b) + 1:
            raise InvalidInputError("need exactly one more level than breakpoints")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "levels", lv)

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        out = self.levels[np.searchsorted(self.breakpoints, q, side="left")]
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LroFit:
    """Constrained MLE bundle returned by :func:`fit_lro`."""

    f_star: StepDistribution
    g_star: StepDistribution
    theta_star: MonotoneStepFn
    mu_star: IsotonicFit
    pooled: PooledSample
    sample: TwoSample = field(repr=False)

    @property
    def pi_n(self) -> float:
        return self.pooled.pi_n

    @property
    def n(self) -> int:
        return self.pooled.n

    def theta(self, z):
        return self.theta_star(z)

    def mu(self, z):
        """Fitted ``P(D = 1 | Z = z)``, extended like ``theta``."""
        z = np.asarray(z, dtype=float)
        zk = self.pooled.z
        idx = np.minimum(np.searchsorted(zk, z, side="left"), len(zk) - 1)
        out = self.mu_star.fitted[idx]
        return float(out) if out.ndim == 0 else out


def ecdf(sample) -> StepDistribution:
    """Empirical distribution function with knots at the distinct values."""
    a = _clean(sample, "sample")
    knots, counts = np.unique(a, return_counts=True)
    return StepDistribution(knots, np.cumsum(counts) / len(a))


def pool(ts: TwoSample) -> PooledSample:
    """Merge the samples into distinct sorted values with origin counts."""
    if not isinstance(ts, TwoSample):
        ts = TwoSample(*ts)
    both = np.concatenate([ts.x, ts.y])
    z, inv = np.unique(both, return_inverse=True)
    total = np.bincount(inv, minlength=len(z))
    d = np.bincount(inv[: ts.n1], minlength=len(z))
    return PooledSample(z, d, total, ts.n1, ts.n2)


def _empirical_at_y(pooled: PooledSample):
    """``F_n``, ``G_n`` and ``H_n`` at the distinct y values."""
    is_y = pooled.y_count > 0
    cum_d = np.cumsum(pooled.d_count)
    cum_y = np.cumsum(pooled.y_count)
    y_knots = pooled.z[is_y]
    fn = cum_d[is_y] / pooled.n1
    gn = cum_y[is_y] / pooled.n2
    hn = (cum_d[is_y] + cum_y[is_y]) / pooled.n
    return y_knots, fn, gn, hn


def _theta_from_mu(mu_levels: np.ndarray, pi_n: float) -> np.ndarray:
    return odds(mu_levels) / odds(pi_n)


def _f_star(pooled: PooledSample, y_knots: np.ndarray, a_star: np.ndarray) -> StepDistribution:
    z, d = pooled.z, pooled.d_count
    m2 = len(y_knots)
    # interval j holds z in (y_{j-1}, y_j]; index m2 is (y_m2, inf)
    interval = np.searchsorted(y_knots, z, side="left")
    r = np.bincount(interval, weights=d, minlength=m2 + 1)
    f = np.empty(m2 + 1)
    f[:m2] = np.diff(a_star, prepend=0.0)
    f[m2] = 1.0 - a_star[-1]
    mass = np.zeros(len(z))
    has_x = d > 0
    mass[has_x] = f[interval[has_x]] * d[has_x] / r[interval[has_x]]
    # intervals with no x: put the mass on the right endpoint y_j
    empty = np.flatnonzero((r[:m2] == 0) & (f[:m2] > 0))
    if len(empty):
        mass[np.searchsorted(z, y_knots[empty])] += f[empty]
    cdf = np.minimum(np.cumsum(mass), 1.0)
    cdf[-1] = 1.0
    return StepDistribution(z, cdf)


def _compress(breaks: np.ndarray, levels: np.ndarray) -> MonotoneStepFn:
    """Build a step function from per-knot levels, merging equal neighbours."""
    keep = np.flatnonzero(levels[1:] != levels[:-1])
    return MonotoneStepFn(breaks[keep], np.concatenate([levels[keep], levels[-1:]]))


def fit_theta(pooled: PooledSample) -> tuple[IsotonicFit, MonotoneStepFn]:
    """Isotonic regression of the origin indicator and the induced ``theta``."""
    mu = pava(pooled.proportions, pooled.total_count.astype(float))
    theta_levels = _theta_from_mu(mu.block_levels, pooled.pi_n)
    last = pooled.z[mu.block_stops[:-1] - 1]
    return mu, MonotoneStepFn(last, theta_levels)


def fit_lro(ts: TwoSample) -> LroFit:
    """Nonparametric MLE of ``(F, G, theta)`` under ``G <=_LR F``.

    Parameters
    ----------
    ts : TwoSample
        ``x`` drawn from F, ``y`` from G.

    Returns
    -------
    LroFit
        ``f_star`` has knots at every pooled value, ``g_star`` at the
        distinct y values.  ``theta_star`` is left-open/right-closed between
        pooled values, constant beyond the data, and ``+inf`` on a top block
        made only of x observations.
    """
    if not isinstance(ts, TwoSample):
        ts = TwoSample(*ts)
    pooled = pool(ts)
    y_knots, fn, gn, hn = _empirical_at_y(pooled)

    h = np.concatenate([[0.0], hn])
    a_star = gcm(PointSet(h, np.concatenate([[0.0], fn])))(hn)
    b_star = lcm(PointSet(h, np.concatenate([[0.0], gn])))(hn)
    b_star[-1] = 1.0

    mu, theta = fit_theta(pooled)
    return LroFit(
        f_star=_f_star(pooled, y_knots, a_star),
        g_star=StepDistribution(y_knots, np.minimum(b_star, 1.0)),
        theta_star=theta,
        mu_star=mu,
        pooled=pooled,
        sample=ts,
    )


def odc_diagram(ts: TwoSample) -> PointSet:
    """Empirical ordinal dominance curve ``{(G_n(y_k), F_n(y_k))}`` from the origin."""
    if not isinstance(ts, TwoSample):
        ts = TwoSample(*ts)
    _, fn, gn, _ = _empirical_at_y(pool(ts))
    return PointSet(np.concatenate([[0.0], gn]), np.concatenate([[0.0], fn]))


def theta_via_odc(ts: TwoSample) -> MonotoneStepFn:
    """Plug-in ratio: left derivative of the GCM of the empirical ODC, composed with ``G_n``.

    Breakpoints are the distinct y values; below the smallest y the first
    slope applies and above the largest y the last.
    """
    if not isinstance(ts, TwoSample):
        ts = TwoSample(*ts)
    pooled = pool(ts)
    y_knots, _, gn, _ = _empirical_at_y(pooled)
    hull = gcm(odc_diagram(ts))
    slopes = left_derivative(hull, gn)
    slopes = np.atleast_1d(slopes)
    return MonotoneStepFn(y_knots[:-1], slopes)


def odc_hull(ts: TwoSample) -> PiecewiseLinearFn:
    return gcm(odc_diagram(ts))


def log_likelihood(ts: TwoSample, F: StepDistribution, G: StepDistribution) -> float:
    """Nonparametric log-likelihood ``sum log dF(X_i) + sum log dG(Y_j)``.

    Returns ``-inf`` when an observation falls on a point of zero mass.
    """
    if not isinstance(ts, TwoSample):
        ts = TwoSample(*ts)
    fx = F.mass_at(ts.x)
    gy = G.mass_at(ts.y)
    if np.any(fx <= 0) or np.any(gy <= 0):
        return -np.inf
    return float(np.sum(np.log(fx)) + np.sum(np.log(gy)))
