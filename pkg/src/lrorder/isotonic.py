"""Weighted isotonic regression on a totally ordered index set.

:func:`pava` solves

    minimise  sum_k w_k (t_k - r_k)^2   subject to  r_1 <= r_2 <= ... <= r_n

by pooling adjacent violators.  For responses in [0, 1] the same vector
maximises the binomial log-likelihood ``sum_k w_k [t_k log r_k +
(1 - t_k) log(1 - r_k)]`` over non-decreasing ``r``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class WeightedSeries:
    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.values, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if t.ndim != 1 or t.shape != w.shape:
            raise InvalidInputError("values and weights must be 1-d and the same length")
        if len(t) == 0:
            raise InvalidInputError("empty series")
        if not np.all(np.isfinite(t)):
            raise InvalidInputError("values must be finite")
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise InvalidInputError("weights must be positive and finite")
        object.__setattr__(self, "values", t)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class IsotonicFit:
    """Fitted values together with their level sets.

    ``block_stops[b]`` is one past the last index of block ``b``;
    ``block_levels[b]`` its fitted value and ``block_weights[b]`` its total
    weight.
    """

    fitted: np.ndarray
    block_stops: np.ndarray
    block_levels: np.ndarray
    block_weights: np.ndarray

    @property
    def block_starts(self) -> np.ndarray:
        return np.concatenate([[0], self.block_stops[:-1]])

    @property
    def n_blocks(self) -> int:
        return len(self.block_stops)


def _as_series(series, weights=None) -> WeightedSeries:
    if isinstance(series, WeightedSeries):
        return series
    if weights is None:
        weights = np.ones(len(series))
    return WeightedSeries(series, weights)


def _pool(t: list, w: list):
    # stack of blocks as (sum w*t, sum w, stop index)
    swt: list[float] = []
    sw: list[float] = []
    stop: list[int] = []
    for k in range(len(t)):
        cur_wt = w[k] * t[k]
        cur_w = w[k]
        # merge while previous mean >= current mean
        while swt and swt[-1] * cur_w >= cur_wt * sw[-1]:
            cur_wt += swt.pop()
            cur_w += sw.pop()
            stop.pop()
        swt.append(cur_wt)
        sw.append(cur_w)
        stop.append(k + 1)
    return swt, sw, stop


def pava(series, weights=None) -> IsotonicFit:
    """Weighted isotonic (non-decreasing) regression by pool adjacent violators.

    Parameters
    ----------
    series : WeightedSeries or array-like
        Responses; if an array, ``weights`` supplies the weights (default 1).
    weights : array-like, optional

    Returns
    -------
    IsotonicFit
        Maximal constant blocks; each block level is the weighted mean of
        its responses.
    """
    s = _as_series(series, weights)
    swt, sw, stop = _pool(s.values.tolist(), s.weights.tolist())
    sw_arr = np.array(sw)
    levels = np.array(swt) / sw_arr
    stops = np.array(stop, dtype=int)
    fitted = np.repeat(levels, np.diff(np.concatenate([[0], stops])))
    return IsotonicFit(fitted, stops, levels, sw_arr)


def _fit_from_values(fitted: np.ndarray, weights: np.ndarray) -> IsotonicFit:
    if len(fitted) == 0:
        empty = np.zeros(0)
        return IsotonicFit(empty, np.zeros(0, dtype=int), empty, empty)
    change = np.flatnonzero(fitted[1:] != fitted[:-1]) + 1
    stops = np.concatenate([change, [len(fitted)]]).astype(int)
    starts = np.concatenate([[0], stops[:-1]])
    levels = fitted[starts]
    bw = np.add.reduceat(weights, starts)
    return IsotonicFit(fitted, stops, levels, bw)


def pava_bounded(series, split: int, bound: float, weights=None) -> IsotonicFit:
    """Isotonic regression with the fit pinned across ``split`` at ``bound``.

    Solves the weighted least-squares problem over non-decreasing ``r``
    with ``r_k <= bound`` for the first ``split`` entries and
    ``r_k >= bound`` for the rest.  The solution is the unconstrained
    isotonic fit of each segment clipped at ``bound``.
    """
    s = _as_series(series, weights)
    n = len(s)
    if not 0 <= split <= n:
        raise InvalidInputError(f"split must lie in [0, {n}], got {split}")
    if not 0.0 <= bound <= 1.0:
        raise InvalidInputError("bound must lie in [0, 1]")
    left, right = bounded_segments(s, split)
    fitted = clip_segments(left, right, bound)
    return _fit_from_values(fitted, s.weights)


def bounded_segments(series: WeightedSeries, split: int):
    """Unconstrained fits of ``series[:split]`` and ``series[split:]``.

    Exposed so callers evaluating many bounds can reuse the two fits.
    """
    t, w = series.values, series.weights
    left = pava(t[:split], w[:split]).fitted if split > 0 else np.zeros(0)
    right = pava(t[split:], w[split:]).fitted if split < len(t) else np.zeros(0)
    return left, right


def clip_segments(left: np.ndarray, right: np.ndarray, bound: float) -> np.ndarray:
    return np.concatenate([np.minimum(left, bound), np.maximum(right, bound)])


def squared_criterion(series, fitted) -> float:
    s = _as_series(series)
    return float(np.sum(s.weights * (s.values - np.asarray(fitted)) ** 2))


def binomial_loglik(successes, totals, fitted) -> float:
    """``sum d log r + (n - d) log(1 - r)`` with the ``0 log 0 = 0`` convention."""
    d = np.asarray(successes, dtype=float)
    f = np.asarray(totals, dtype=float) - d
    r = np.asarray(fitted, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(d > 0, d * np.log(r), 0.0)
        b = np.where(f > 0, f * np.log1p(-r), 0.0)
    return float(np.sum(a) + np.sum(b))
