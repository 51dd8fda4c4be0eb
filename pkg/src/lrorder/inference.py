"""Pointwise confidence intervals for the density ratio ``theta``.

Five constructions are provided:

``discrete-wald``
    Normal approximation at an atom, built on ``log theta`` and
    exponentiated.
``theta-wald``
    ``theta_hat -+ (4 tau / n)^(1/3) q`` with ``q`` a Chernoff quantile and
    ``tau = kappa * theta'`` estimated by plug-in.
``mu-wald-transformed``
    The same Chernoff-based Wald interval for ``mu(z) = P(D = 1 | Z = z)``,
    mapped to the ``theta`` scale through the odds transform.
``lrt``
    Inversion of the likelihood ratio test of ``mu(z) = mu0`` in the
    isotonic binomial model.
``split``
    Averages of estimators fitted on ``m`` random subsets, with a Student-t
    interval.

Nuisance estimates use Gaussian kernel density estimates (Silverman's
rule) and a symmetric difference quotient of the fitted step function over
a window of half-width ``window * n^(-1/5) * range(data)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import (
    DegenerateOrderError,
    InvalidInputError,
    UndefinedNuisanceError,
    UnsupportedPointError,
)
from .estimators import LroFit, TwoSample, fit_theta, odds, pool
from .isotonic import WeightedSeries, binomial_loglik, bounded_segments, clip_segments
from .quantiles import QuantileTable, load_table

METHODS = ("discrete-wald", "theta-wald", "mu-wald-transformed", "lrt", "split")

DERIVATIVE_WINDOW = 0.5
KDE_BANDWIDTH = "silverman"
LRT_TOL = 1e-6
LRT_MAX_ITER = 100
SPLIT_RETRIES = 20


@dataclass
class IntervalEstimate:
    z: float
    estimate: float
    lower: float
    upper: float
    level: float
    method: str
    nuisances: dict[str, float] = field(default_factory=dict)
    status: str = "ok"

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        return {
            "z": _num(self.z),
            "method": self.method,
            "level": self.level,
            "estimate": _num(self.estimate),
            "lower": _num(self.lower),
            "upper": _num(self.upper),
            "status": self.status,
            "nuisances": {k: _num(v) for k, v in sorted(self.nuisances.items())},
        }


def _num(v):
    """JSON-safe float: infinities become the strings ``"inf"``/``"-inf"``."""
    if v is None:
        return None
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return v


def _check_level(level: float) -> None:
    if not 0.0 < level < 1.0:
        raise InvalidInputError(f"level must lie in (0, 1), got {level}")


def _kde_at(sample: np.ndarray, z: float, bw_method=KDE_BANDWIDTH) -> float:
    if len(sample) < 2 or np.ptp(sample) == 0:
        raise UndefinedNuisanceError("kernel density estimate needs at least two distinct values")
    return float(stats.gaussian_kde(sample, bw_method=bw_method)(z)[0])


def _require_interior(fit: LroFit, z: float) -> None:
    zk = fit.pooled.z
    if not zk[0] < z < zk[-1]:
        raise UnsupportedPointError(
            f"z={z} is not strictly inside the pooled data range [{zk[0]}, {zk[-1]}]"
        )


def derivative_window(fit: LroFit, window: float = DERIVATIVE_WINDOW) -> float:
    zk = fit.pooled.z
    return window * fit.n ** (-0.2) * float(zk[-1] - zk[0])


def _difference_quotient(fn, z: float, b: float) -> float:
    hi, lo = fn(z + b), fn(z - b)
    if math.isinf(hi):
        return math.inf
    return max(0.0, (hi - lo) / (2.0 * b))


# -- discrete case ---------------------------------------------------------

def discrete_variance(theta: float, delta_f: float, delta_g: float, pi: float) -> float:
    """Asymptotic variance of ``sqrt(n) (theta_hat - theta)`` at an atom."""
    return theta * (pi * delta_f + (1 - pi) * delta_g - delta_f * delta_g) / (
        pi * (1 - pi) * delta_g ** 2
    )


def discrete_wald_ci(fit: LroFit, z: float, level: float = 0.95) -> IntervalEstimate:
    """Wald interval at an atom of the fitted distributions.

    Built on the log scale with the delta method and exponentiated, using
    the fitted masses of ``F*`` and ``G*`` at ``z`` in the variance.
    """
    _check_level(level)
    dg = float(fit.g_star.mass_at(z))
    df = float(fit.f_star.mass_at(z))
    if dg <= 0:
        raise UndefinedNuisanceError(f"fitted G has no mass at z={z}; variance undefined")
    theta = float(fit.theta(z))
    pi = fit.pi_n
    var = discrete_variance(theta, df, dg, pi)
    nuis = {"delta_f": df, "delta_g": dg, "variance": var}
    if theta <= 0 or math.isinf(theta):
        return IntervalEstimate(z, theta, theta, theta, level, "discrete-wald", nuis, "degenerate")
    se_log = math.sqrt(var / fit.n) / theta
    nuis["se_log"] = se_log
    crit = stats.norm.ppf(0.5 + level / 2)
    return IntervalEstimate(
        z, theta, theta * math.exp(-crit * se_log), theta * math.exp(crit * se_log),
        level, "discrete-wald", nuis,
    )


# -- continuous case -------------------------------------------------------

def tau_nuisances(fit: LroFit, z: float, window: float = DERIVATIVE_WINDOW,
                  bw_method=KDE_BANDWIDTH) -> dict[str, float]:
    """Plug-in pieces of ``tau = kappa * theta'`` at ``z``."""
    _require_interior(fit, z)
    f_hat = _kde_at(fit.sample.x, z, bw_method)
    g_hat = _kde_at(fit.sample.y, z, bw_method)
    if g_hat <= 0:
        raise UndefinedNuisanceError(f"estimated g density is zero at z={z}")
    pi = fit.pi_n
    theta = float(fit.theta(z))
    kappa = theta * (pi * f_hat + (1 - pi) * g_hat) / (pi * (1 - pi) * g_hat ** 2)
    b = derivative_window(fit, window)
    theta_prime = _difference_quotient(fit.theta, z, b)
    tau = kappa * theta_prime if theta_prime > 0 else 0.0
    return {"f_n": f_hat, "g_n": g_hat, "kappa_n": kappa, "theta_prime_n": theta_prime,
            "window": b, "tau_n": tau}


def estimate_tau(fit: LroFit, z: float, window: float = DERIVATIVE_WINDOW,
                 bw_method=KDE_BANDWIDTH) -> float:
    return tau_nuisances(fit, z, window, bw_method)["tau_n"]


def theta_wald_ci(fit: LroFit, z: float, level: float = 0.95, tau_n: float | None = None,
                  table: QuantileTable | None = None, **nuisance_kw) -> IntervalEstimate:
    """Chernoff-quantile Wald interval directly on the ``theta`` scale."""
    _check_level(level)
    q = (table or load_table()).chernoff(0.5 + level / 2)
    nuis = tau_nuisances(fit, z, **nuisance_kw) if tau_n is None else {"tau_n": tau_n}
    tau = nuis["tau_n"]
    if tau < 0:
        raise InvalidInputError("tau_n must be non-negative")
    theta = float(fit.theta(z))
    half = (4.0 * tau / fit.n) ** (1 / 3) * q
    return IntervalEstimate(z, theta, max(0.0, theta - half), theta + half, level,
                            "theta-wald", nuis)


def mu_wald_transformed_ci(fit: LroFit, z: float, level: float = 0.95,
                           table: QuantileTable | None = None,
                           window: float = DERIVATIVE_WINDOW,
                           bw_method=KDE_BANDWIDTH) -> IntervalEstimate:
    """Chernoff-quantile Wald interval for ``mu(z)``, mapped to ``theta``.

    The ``mu`` interval is clipped to ``[0, 1]``; an upper end at 1 maps
    to ``+inf``.
    """
    _check_level(level)
    _require_interior(fit, z)
    q = (table or load_table()).chernoff(0.5 + level / 2)
    h_hat = _kde_at(np.concatenate([fit.sample.x, fit.sample.y]), z, bw_method)
    mu = float(fit.mu(z))
    b = derivative_window(fit, window)
    mu_prime = _difference_quotient(fit.mu, z, b)
    half = (4.0 * mu_prime * mu * (1 - mu) / (h_hat * fit.n)) ** (1 / 3) * q
    lo, hi = max(0.0, mu - half), min(1.0, mu + half)
    t_pi = odds(fit.pi_n)
    nuis = {"h_n": h_hat, "mu_n": mu, "mu_prime_n": mu_prime, "window": b,
            "mu_lower": lo, "mu_upper": hi}
    return IntervalEstimate(z, float(fit.theta(z)), odds(lo) / t_pi, odds(hi) / t_pi, level,
                            "mu-wald-transformed", nuis)


# -- likelihood ratio inversion ---------------------------------------------

class _LrtProblem:
    """Binomial isotonic model at one point, with the segment fits cached."""

    def __init__(self, fit: LroFit, z: float):
        p = fit.pooled
        self.d = p.d_count
        self.total = p.total_count
        self.index = int(np.searchsorted(p.z, z, side="left"))
        series = WeightedSeries(p.proportions, p.total_count.astype(float))
        self.left, self.right = bounded_segments(series, self.index + 1)
        self.mu_hat = float(fit.mu_star.fitted[self.index])
        self.loglik_hat = binomial_loglik(self.d, self.total, fit.mu_star.fitted)

    def statistic(self, bound: float) -> float:
        constrained = clip_segments(self.left, self.right, bound)
        ll = binomial_loglik(self.d, self.total, constrained)
        return max(0.0, 2.0 * (self.loglik_hat - ll))


def lrt_statistic(fit: LroFit, z: float, mu0: float) -> float:
    """Twice the log likelihood ratio for ``H0: mu(z) = mu0``."""
    _require_interior(fit, z)
    return _LrtProblem(fit, z).statistic(mu0)


def _bisect(stat, inside: float, outside: float, crit: float, to_theta, tol: float,
            max_iter: int) -> float:
    # invariant: stat(inside) <= crit < stat(outside)
    for _ in range(max_iter):
        if abs(to_theta(inside) - to_theta(outside)) < tol:
            break
        mid = 0.5 * (inside + outside)
        if stat(mid) <= crit:
            inside = mid
        else:
            outside = mid
    return inside


def lrt_ci(fit: LroFit, z: float, level: float = 0.95, table: QuantileTable | None = None,
           calibration: str = "pivotal", tol: float = LRT_TOL,
           max_iter: int = LRT_MAX_ITER) -> IntervalEstimate:
    """Invert the likelihood ratio test for ``mu(z)`` and map to ``theta``.

    ``calibration="pivotal"`` compares the statistic with the tabulated
    quantile of the nuisance-free cube-root limit; ``"chi2"`` uses the
    chi-square(1) quantile, which is the limit at an isolated atom where
    the estimator is root-n normal.
    """
    _check_level(level)
    _require_interior(fit, z)
    if calibration == "pivotal":
        crit = (table or load_table()).lrt(level)
    elif calibration == "chi2":
        crit = float(stats.chi2.ppf(level, 1))
    else:
        raise InvalidInputError(f"unknown calibration {calibration!r}")
    prob = _LrtProblem(fit, z)
    t_pi = odds(fit.pi_n)

    def to_theta(m):
        return odds(m) / t_pi

    mu_hat = prob.mu_hat
    lo = 0.0 if prob.statistic(0.0) <= crit else _bisect(
        prob.statistic, mu_hat, 0.0, crit, to_theta, tol, max_iter)
    if prob.statistic(1.0) <= crit:
        hi = 1.0
    else:
        # bisect on the odds scale: theta may be large near mu = 1
        hi = _bisect(prob.statistic, mu_hat, _upper_start(prob, crit), crit,
                     to_theta, tol, max_iter)
    return IntervalEstimate(z, float(fit.theta(z)), to_theta(lo), to_theta(hi), level, "lrt",
                            {"critical_value": crit, "mu_n": mu_hat, "mu_lower": lo,
                             "mu_upper": hi})


def _upper_start(prob: _LrtProblem, crit: float) -> float:
    # smallest point of the form 1 - 2^-k that is already rejected
    b = 0.5 * (1.0 + prob.mu_hat)
    while prob.statistic(b) <= crit and b < 1.0 - 1e-15:
        b = 0.5 * (1.0 + b)
    return b


# -- sample splitting ------------------------------------------------------

@dataclass
class SplitEstimate:
    """Per-subset estimates at ``z`` and their pooled summary.

    ``sigma_nm`` is the standard deviation of the subset estimates on the
    ``n^(1/3)`` scale, i.e. ``n^(1/3) * spread``.
    """

    z: float
    m: int
    n: int
    values: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def spread(self) -> float:
        if not np.all(np.isfinite(self.values)):
            return math.inf
        return float(np.std(self.values, ddof=1))

    @property
    def sigma_nm(self) -> float:
        return self.n ** (1 / 3) * self.spread


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def split_thetas(ts: TwoSample, zs, m: int, seed) -> np.ndarray:
    """Estimates at ``zs`` from each of ``m`` random subsets; shape ``(m, len(zs))``.

    The ``(Z, D)`` pairs are partitioned into ``m`` nearly equal groups.  A
    partition in which some group is degenerate is redrawn, up to
    ``SPLIT_RETRIES`` times.
    """
    if m < 2:
        raise InvalidInputError("sample splitting needs m >= 2")
    if not isinstance(ts, TwoSample):
        ts = TwoSample(*ts)
    n = ts.n1 + ts.n2
    if n < 2 * m:
        raise InvalidInputError(f"need n >= 2m observations, got n={n}, m={m}")
    zs = np.atleast_1d(np.asarray(zs, dtype=float))
    values = np.concatenate([ts.x, ts.y])
    origin = np.r_[np.ones(ts.n1, dtype=bool), np.zeros(ts.n2, dtype=bool)]
    rng = _as_rng(seed)
    for _ in range(SPLIT_RETRIES):
        groups = np.array_split(rng.permutation(n), m)
        try:
            out = np.empty((m, len(zs)))
            for j, g in enumerate(groups):
                sub = TwoSample(values[g][origin[g]], values[g][~origin[g]])
                out[j] = fit_theta(pool(sub))[1](zs)
            return out
        except (DegenerateOrderError, InvalidInputError):
            continue
    raise DegenerateOrderError(f"no valid {m}-way split found in {SPLIT_RETRIES} attempts")


def split_fit(ts: TwoSample, z: float, m: int = 5, seed=0) -> SplitEstimate:
    vals = split_thetas(ts, [z], m, seed)[:, 0]
    if not isinstance(ts, TwoSample):
        ts = TwoSample(*ts)
    return SplitEstimate(float(z), m, ts.n1 + ts.n2, vals)


def split_fits(ts: TwoSample, zs, m: int = 5, seed=0) -> list[SplitEstimate]:
    """Like :func:`split_fit` for several points sharing one partition."""
    if not isinstance(ts, TwoSample):
        ts = TwoSample(*ts)
    vals = split_thetas(ts, zs, m, seed)
    return [SplitEstimate(float(z), m, ts.n1 + ts.n2, vals[:, i])
            for i, z in enumerate(np.atleast_1d(zs))]


def split_ci(se: SplitEstimate, level: float = 0.95) -> IntervalEstimate:
    """``mean -+ sigma_nm * t_{m-1} / (sqrt(m) n^(1/3))``."""
    _check_level(level)
    if se.m < 2:
        raise InvalidInputError("sample splitting needs m >= 2")
    tq = float(stats.t.ppf(0.5 + level / 2, se.m - 1))
    nuis = {"m": se.m, "sigma_nm": se.sigma_nm, "t_quantile": tq}
    mean = se.mean
    if not math.isfinite(se.sigma_nm):
        return IntervalEstimate(se.z, mean, 0.0, math.inf, level, "split", nuis, "degenerate")
    half = se.sigma_nm * tq / (math.sqrt(se.m) * se.n ** (1 / 3))
    return IntervalEstimate(se.z, mean, max(0.0, mean - half), mean + half, level, "split", nuis)


def interval(fit: LroFit, z: float, method: str, level: float = 0.95, *, m: int = 5,
             seed=0, calibration: str = "pivotal", **kw) -> IntervalEstimate:
    """Dispatch to one of :data:`METHODS` by name."""
    if method == "discrete-wald":
        return discrete_wald_ci(fit, z, level)
    if method == "theta-wald":
        return theta_wald_ci(fit, z, level, **kw)
    if method == "mu-wald-transformed":
        return mu_wald_transformed_ci(fit, z, level, **kw)
    if method == "lrt":
        return lrt_ci(fit, z, level, calibration=calibration)
    if method == "split":
        return split_ci(split_fit(fit.sample, z, m, seed), level)
    raise InvalidInputError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
