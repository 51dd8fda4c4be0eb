"""Quantiles of Chernoff's distribution and of the pivotal LRT limit.

Both laws are functionals of two-sided Brownian motion and have no closed
form.  They are simulated once on a fine grid and stored in a plain-text
``key = value`` table shipped with the package (``data/quantiles.txt``);
:func:`build_quantile_table` regenerates it.

* Chernoff's ``W`` is the location of the maximum of ``B(u) - u^2``.
* The LRT limit ``D`` is ``int (g(u)^2 - g0(u)^2) du`` where ``g`` is the
  slope of the GCM of ``B(u) + u^2`` and ``g0`` the slope of the same GCM
  computed separately on each side of zero and clipped so that it is
  ``<= 0`` to the left and ``>= 0`` to the right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import isotonic_regression
from scipy.stats import gaussian_kde

from .errors import QuantileTableError

TABLE_VERSION = 1

CHERNOFF_LEVELS = (0.5, 0.75, 0.8, 0.85, 0.9, 0.95, 0.975, 0.99, 0.995)
LRT_LEVELS = (0.5, 0.75, 0.8, 0.85, 0.9, 0.95, 0.975, 0.99)

DEFAULT_CHERNOFF = dict(replications=200_000, grid_step=0.001, truncation=2.5, seed=20_190_514)
DEFAULT_LRT = dict(replications=50_000, grid_step=0.001, truncation=2.5, seed=20_010_301)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream])))


def simulate_chernoff(replications: int, grid_step: float = 0.001, truncation: float = 2.5,
                      seed: int = 0, chunk: int = 1000) -> np.ndarray:
    """Draws of ``argmax_u {B(u) - u^2}`` on ``[-truncation, truncation]``."""
    k = int(round(truncation / grid_step))
    u = np.arange(1, k + 1) * grid_step
    drift = u ** 2
    scale = math.sqrt(grid_step)
    out = np.empty(replications)
    for block, start in enumerate(range(0, replications, chunk)):
        rng = _rng(seed, block)
        c = min(chunk, replications - start)
        rows = np.arange(c)
        right = np.cumsum(rng.standard_normal((c, k)), axis=1) * scale - drift
        left = np.cumsum(rng.standard_normal((c, k)), axis=1) * scale - drift
        ri, li = right.argmax(axis=1), left.argmax(axis=1)
        rmax, lmax = right[rows, ri], left[rows, li]
        # the origin itself has value 0
        out[start:start + c] = np.where(
            np.maximum(rmax, lmax) <= 0.0, 0.0, np.where(rmax >= lmax, u[ri], -u[li])
        )
    return out


def _lrt_statistic(slopes: np.ndarray, k: int, grid_step: float) -> float:
    g = isotonic_regression(slopes).x
    g0 = np.concatenate([
        np.minimum(isotonic_regression(slopes[:k]).x, 0.0),
        np.maximum(isotonic_regression(slopes[k:]).x, 0.0),
    ])
    return float(np.sum(g * g - g0 * g0) * grid_step)


def simulate_lrt_limit(replications: int, grid_step: float = 0.001, truncation: float = 2.5,
                       seed: int = 0, chunk: int = 1000) -> np.ndarray:
    """Draws of the pivotal limit of twice the log likelihood ratio."""
    k = int(round(truncation / grid_step))
    t = np.arange(-k, k + 1) * grid_step
    drift_slope = np.diff(t ** 2) / grid_step
    scale = 1.0 / math.sqrt(grid_step)
    out = np.empty(replications)
    for block, start in enumerate(range(0, replications, chunk)):
        rng = _rng(seed, block)
        c = min(chunk, replications - start)
        noise = rng.standard_normal((c, 2 * k)) * scale
        for i in range(c):
            out[start + i] = _lrt_statistic(noise[i] + drift_slope, k, grid_step)
    return out


def _quantile_se(draws: np.ndarray, level: float) -> float:
    q = np.quantile(draws, level)
    dens = gaussian_kde(draws[: min(len(draws), 20_000)])(q)[0]
    return math.sqrt(level * (1 - level) / len(draws)) / dens


@dataclass
class QuantileTable:
    """Static quantile lookups plus the oracle settings that produced them."""

    chernoff_q: dict[float, float]
    lrt_d: dict[float, float]
    chernoff_sd: float
    meta: dict[str, str] = field(default_factory=dict)

    def chernoff(self, level: float) -> float:
        return _lookup(self.chernoff_q, level, "Chernoff")

    def lrt(self, level: float) -> float:
        return _lookup(self.lrt_d, level, "LRT")

    def dumps(self) -> str:
        lines = ["# lrorder quantile table (Monte Carlo oracle output)",
                 f"version = {TABLE_VERSION}"]
        lines += [f"{k} = {v}" for k, v in self.meta.items()]
        lines.append(f"chernoff.sd = {self.chernoff_sd:.6f}")
        lines += [f"chernoff.q.{lv!r} = {q:.6f}" for lv, q in sorted(self.chernoff_q.items())]
        lines += [f"lrt.q.{lv!r} = {q:.6f}" for lv, q in sorted(self.lrt_d.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "QuantileTable":
        cq: dict[float, float] = {}
        ld: dict[float, float] = {}
        meta: dict[str, str] = {}
        sd = float("nan")
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = (s.strip() for s in line.partition("="))
            if key.startswith("chernoff.q."):
                cq[float(key[len("chernoff.q."):])] = float(value)
            elif key.startswith("lrt.q."):
                ld[float(key[len("lrt.q."):])] = float(value)
            elif key == "chernoff.sd":
                sd = float(value)
            elif key != "version":
                meta[key] = value
            elif int(value) != TABLE_VERSION:
                raise QuantileTableError(f"unsupported table version {value}")
        return cls(cq, ld, sd, meta)


def _lookup(table: dict[float, float], level: float, name: str) -> float:
    for lv, q in table.items():
        if abs(lv - level) < 1e-9:
            return q
    raise QuantileTableError(f"{name} quantile at level {level} is not tabulated "
                             f"(available: {sorted(table)})")


def build_quantile_table(chernoff_params: dict | None = None, lrt_params: dict | None = None,
                         progress=None) -> QuantileTable:
    """Run both oracles and assemble a table, recording their settings.

    When fewer replications than the defaults are used the header carries
    ``reduced = true`` and the estimated standard error of the headline
    quantiles, so a consumer can see the looser tolerance.
    """
    cp = {**DEFAULT_CHERNOFF, **(chernoff_params or {})}
    lp = {**DEFAULT_LRT, **(lrt_params or {})}
    if progress:
        progress(f"simulating Chernoff argmax: {cp}")
    w = simulate_chernoff(**cp)
    if progress:
        progress(f"simulating LRT limit: {lp}")
    d = simulate_lrt_limit(**lp)

    meta: dict[str, str] = {}
    for prefix, params, defaults, draws, lv in (
        ("chernoff", cp, DEFAULT_CHERNOFF, w, 0.975),
        ("lrt", lp, DEFAULT_LRT, d, 0.95),
    ):
        for key in ("replications", "grid_step", "truncation", "seed"):
            meta[f"{prefix}.{key}"] = str(params[key])
        reduced = params["replications"] < defaults["replications"]
        meta[f"{prefix}.reduced"] = "true" if reduced else "false"
        meta[f"{prefix}.tolerance.{lv!r}"] = f"{_quantile_se(draws, lv):.5f}"
    return QuantileTable(
        chernoff_q={lv: float(np.quantile(w, lv)) for lv in CHERNOFF_LEVELS},
        lrt_d={lv: float(np.quantile(d, lv)) for lv in LRT_LEVELS},
        chernoff_sd=float(np.std(w, ddof=1)),
        meta=meta,
    )


def write_table(table: QuantileTable, path) -> None:
    Path(path).write_text(table.dumps(), encoding="utf-8")


@lru_cache(maxsize=None)
def _embedded() -> QuantileTable:
    text = resources.files("lrorder").joinpath("data/quantiles.txt").read_text(encoding="utf-8")
    return QuantileTable.loads(text)


def load_table(path=None) -> QuantileTable:
    if path is None:
        return _embedded()
    return QuantileTable.loads(Path(path).read_text(encoding="utf-8"))


def chernoff_quantiles(levels, table: QuantileTable | None = None) -> dict[float, float]:
    """Tabulated quantiles of Chernoff's distribution at ``levels``."""
    table = table or load_table()
    return {float(lv): table.chernoff(lv) for lv in np.atleast_1d(levels)}


def lrt_quantiles(levels, table: QuantileTable | None = None) -> dict[float, float]:
    """Tabulated quantiles of the pivotal LRT limit at ``levels``."""
    table = table or load_table()
    return {float(lv): table.lrt(lv) for lv in np.atleast_1d(levels)}


def chernoff_sd(table: QuantileTable | None = None) -> float:
    return (table or load_table()).chernoff_sd
