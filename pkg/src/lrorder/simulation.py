"""Scenario generators and the Monte Carlo harness.

Three designs are built in:

``discrete-poisson``
    X ~ Poisson(6), Y ~ Poisson(4).
``continuous-exponential``
    X ~ Exp(rate 1), Y ~ Exp(rate 2); ``theta(z) = exp(z) / 2``.
``mixed``
    Y puts mass 1/9 on each of 0, 0.5, 1 and is otherwise Uniform[0, 1];
    X puts masses 1/18, 1/9, 3/18 on 0, 0.5, 1 and otherwise has density
    ``0.5 + x`` on [0, 1].  ``theta(z) = 0.5 + z`` on [0, 1].

Each replication draws ``n1 ~ Binomial(n, pi0)`` and is keyed by
``(seed, n, replication)`` through a counter-based generator, so results
do not depend on how replications are scheduled across workers.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import inference
from .errors import DegenerateOrderError, InvalidInputError, LROError, UndefinedNuisanceError
from .estimators import TwoSample, ecdf, fit_lro
from .quantiles import chernoff_sd

KINDS = ("discrete-poisson", "continuous-exponential", "mixed")
ESTIMATORS = ("mle", "kde", "split")
INTERVALS = ("discrete-wald", "theta-wald", "mu-wald-transformed", "lrt", "split")
SAMPLE_RETRIES = 20

MIXED_Y_ATOMS = {0.0: 1 / 9, 0.5: 1 / 9, 1.0: 1 / 9}
MIXED_X_ATOMS = {0.0: 1 / 18, 0.5: 1 / 9, 1.0: 3 / 18}


def _grid(start: float, stop: float, step: float) -> tuple[float, ...]:
    k = int(round((stop - start) / step))
    return tuple(round(start + i * step, 10) for i in range(k + 1))


@dataclass(frozen=True)
class Scenario:
    kind: str
    pi0: float = 0.4
    rate_x: float = 1.0
    rate_y: float = 1.0
    eval_grid: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown scenario kind {self.kind!r}; choose from {KINDS}")
        if not 0.0 < self.pi0 < 1.0:
            raise InvalidInputError("pi0 must lie in (0, 1)")
        if self.rate_x <= 0 or self.rate_y <= 0:
            raise InvalidInputError("rates must be positive")

    @property
    def boundary(self) -> tuple[float, ...]:
        if self.kind == "mixed":
            return (0.0, 1.0)
        return (0.0,)

    @property
    def atoms(self) -> tuple[float, ...]:
        if self.kind == "mixed":
            return tuple(MIXED_Y_ATOMS)
        return ()


def poisson_scenario(rate_x: float = 6.0, rate_y: float = 4.0, pi0: float = 0.4) -> Scenario:
    return Scenario("discrete-poisson", pi0, rate_x, rate_y, _grid(0, 10, 1))


def exponential_scenario(rate_x: float = 1.0, rate_y: float = 2.0, pi0: float = 0.4) -> Scenario:
    if rate_x > rate_y:
        raise InvalidInputError("theta is non-decreasing only when rate_x <= rate_y")
    return Scenario("continuous-exponential", pi0, rate_x, rate_y, _grid(0, 2, 0.1))


def mixed_scenario(pi0: float = 0.4) -> Scenario:
    return Scenario("mixed", pi0, eval_grid=_grid(0, 1, 0.05))


def make_scenario(kind: str, **params) -> Scenario:
    factories = {"discrete-poisson": poisson_scenario,
                 "continuous-exponential": exponential_scenario,
                 "mixed": mixed_scenario}
    if kind not in factories:
        raise InvalidInputError(f"unknown scenario kind {kind!r}; choose from {KINDS}")
    grid = params.pop("eval_grid", None)
    s = factories[kind](**params)
    return replace(s, eval_grid=tuple(grid)) if grid is not None else s


# -- truth -----------------------------------------------------------------

def _in_support(s: Scenario, z: float) -> bool:
    if s.kind == "discrete-poisson":
        return z >= 0 and float(z).is_integer()
    if s.kind == "continuous-exponential":
        return z >= 0
    return 0.0 <= z <= 1.0


def true_masses(s: Scenario, z: float) -> tuple[float, float]:
    """Point masses of ``F0`` and ``G0`` at ``z``."""
    if s.kind == "discrete-poisson":
        return float(stats.poisson.pmf(z, s.rate_x)), float(stats.poisson.pmf(z, s.rate_y))
    if s.kind == "mixed":
        return MIXED_X_ATOMS.get(float(z), 0.0), MIXED_Y_ATOMS.get(float(z), 0.0)
    return 0.0, 0.0


def true_densities(s: Scenario, z: float) -> tuple[float, float]:
    """Lebesgue densities of the continuous parts of ``F0`` and ``G0``."""
    if s.kind == "continuous-exponential":
        return s.rate_x * math.exp(-s.rate_x * z), s.rate_y * math.exp(-s.rate_y * z)
    if s.kind == "mixed":
        return 2 / 3 * (0.5 + z), 2 / 3
    return 0.0, 0.0


def true_theta(s: Scenario, z: float) -> float:
    """Population density (or mass) ratio at ``z``."""
    if not _in_support(s, z):
        raise InvalidInputError(f"z={z} is outside the support of G0 for {s.kind}")
    if s.kind == "discrete-poisson":
        return (s.rate_x / s.rate_y) ** z * math.exp(s.rate_y - s.rate_x)
    if s.kind == "continuous-exponential":
        return s.rate_x / s.rate_y * math.exp((s.rate_y - s.rate_x) * z)
    if float(z) in MIXED_Y_ATOMS:
        fx, gy = true_masses(s, z)
        return fx / gy
    return 0.5 + z


def true_theta_prime(s: Scenario, z: float) -> float:
    if s.kind == "continuous-exponential":
        return (s.rate_y - s.rate_x) * true_theta(s, z)
    if s.kind == "mixed":
        return 1.0
    raise InvalidInputError("theta has no derivative in the discrete scenario")


def asymptotic_sd(s: Scenario, z: float) -> tuple[float, float] | None:
    """``(rate exponent, sd)`` of the limit law of ``n^rate (theta_n - theta0)``.

    Atoms use the root-n normal limit; continuity points use the cube-root
    Chernoff limit.  Boundary points return ``None``.
    """
    if z in s.boundary:
        return None
    theta = true_theta(s, z)
    if s.kind == "discrete-poisson" or z in s.atoms:
        df, dg = true_masses(s, z)
        return 0.5, math.sqrt(inference.discrete_variance(theta, df, dg, s.pi0))
    f, g = true_densities(s, z)
    kappa = theta * (s.pi0 * f + (1 - s.pi0) * g) / (s.pi0 * (1 - s.pi0) * g * g)
    return 1 / 3, (4 * kappa * true_theta_prime(s, z)) ** (1 / 3) * chernoff_sd()


# -- sampling --------------------------------------------------------------

def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


def _draw_x(s: Scenario, size: int, rng: np.random.Generator) -> np.ndarray:
    if s.kind == "discrete-poisson":
        return rng.poisson(s.rate_x, size).astype(float)
    if s.kind == "continuous-exponential":
        return rng.exponential(1 / s.rate_x, size)
    atoms = np.array(list(MIXED_X_ATOMS))
    probs = np.array(list(MIXED_X_ATOMS.values()))
    u = rng.random(size)
    cont = -0.5 + np.sqrt(0.25 + 2 * rng.random(size))  # inverse of 0.5x + x^2/2
    which = np.searchsorted(np.cumsum(probs), u, side="right")
    return np.where(which < len(atoms), atoms[np.minimum(which, len(atoms) - 1)], cont)


def _draw_y(s: Scenario, size: int, rng: np.random.Generator) -> np.ndarray:
    if s.kind == "discrete-poisson":
        return rng.poisson(s.rate_y, size).astype(float)
    if s.kind == "continuous-exponential":
        return rng.exponential(1 / s.rate_y, size)
    atoms = np.array(list(MIXED_Y_ATOMS))
    probs = np.array(list(MIXED_Y_ATOMS.values()))
    u = rng.random(size)
    cont = rng.random(size)
    which = np.searchsorted(np.cumsum(probs), u, side="right")
    return np.where(which < len(atoms), atoms[np.minimum(which, len(atoms) - 1)], cont)


def sample_scenario(s: Scenario, n: int, seed) -> TwoSample:
    """Draw ``n`` pooled observations with ``n1 ~ Binomial(n, pi0)``.

    Draws with ``n1`` in ``{0, n}`` or violating the order assumption are
    redrawn, at most ``SAMPLE_RETRIES`` times.
    """
    if n < 2:
        raise InvalidInputError("need n >= 2")
    rng = seed if isinstance(seed, np.random.Generator) else _rng(seed)
    for _ in range(SAMPLE_RETRIES):
        n1 = int(rng.binomial(n, s.pi0))
        if n1 in (0, n):
            continue
        try:
            return TwoSample(_draw_x(s, n1, rng), _draw_y(s, n - n1, rng))
        except DegenerateOrderError:
            continue
    raise DegenerateOrderError(f"no valid sample after {SAMPLE_RETRIES} draws")


def kde_ratio_estimator(ts: TwoSample, z, bw_method=inference.KDE_BANDWIDTH):
    """Unconstrained ratio of Gaussian kernel density estimates ``f_n / g_n``."""
    if not isinstance(ts, TwoSample):
        ts = TwoSample(*ts)
    for name, a in (("x", ts.x), ("y", ts.y)):
        if len(a) < 2 or np.ptp(a) == 0:
            raise UndefinedNuisanceError(f"{name} sample needs two distinct values for a KDE")
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    f = stats.gaussian_kde(ts.x, bw_method=bw_method)(zz)
    g = stats.gaussian_kde(ts.y, bw_method=bw_method)(zz)
    if np.any(g <= 0):
        raise UndefinedNuisanceError("estimated g density is zero")
    out = f / g
    return float(out[0]) if np.ndim(z) == 0 else out


# -- study -----------------------------------------------------------------

@dataclass
class StudySettings:
    n_list: tuple[int, ...] = (500,)
    replications: int = 500
    methods: tuple[str, ...] = ("mle",)
    seed: int = 0
    level: float = 0.95
    m: int = 5
    lrt_calibration: str = "pivotal"

    def __post_init__(self):
        if self.replications < 1:
            raise InvalidInputError("replications must be >= 1")
        if not 0 < self.level < 1:
            raise InvalidInputError("level must lie in (0, 1)")
        known = set(ESTIMATORS) | set(INTERVALS)
        bad = [m for m in self.methods if m not in known]
        if bad:
            raise InvalidInputError(f"unknown methods {bad}; choose from {sorted(known)}")
        if any(n < 2 for n in self.n_list):
            raise InvalidInputError("sample sizes must be >= 2")


def _replicate(task) -> dict:
    s, n, rep, st, fstar_check = task
    ts = sample_scenario(s, n, _rng(st.seed, n, rep, 0))
    fit = fit_lro(ts)
    grid = np.asarray(s.eval_grid, dtype=float)
    out: dict = {"est": {"mle": fit.theta(grid)}, "ci": {}, "fail": {}}
    if fstar_check:
        fn = ecdf(ts.x)
        out["fstar_equals_fn"] = bool(
            np.max(np.abs(fit.f_star(fn.knots) - fn.cdf_values)) < 1e-12
        )
    if "kde" in st.methods:
        try:
            out["est"]["kde"] = kde_ratio_estimator(ts, grid)
        except LROError:
            out["est"]["kde"] = np.full(len(grid), np.nan)
            out["fail"]["kde"] = len(grid)
    if "split" in st.methods:
        vals = inference.split_thetas(ts, grid, st.m, _rng(st.seed, n, rep, 1))
        ests = [inference.SplitEstimate(z, st.m, n, vals[:, i]) for i, z in enumerate(grid)]
        out["est"]["split"] = np.array([e.mean for e in ests])
        cis = [inference.split_ci(e, st.level) for e in ests]
        out["ci"]["split"] = np.array([[c.lower, c.upper] for c in cis])
    for method in st.methods:
        if method in ("split",) or method not in INTERVALS:
            continue
        bounds = np.full((len(grid), 2), np.nan)
        failed = 0
        for i, z in enumerate(grid):
            try:
                ci = inference.interval(fit, float(z), method, st.level,
                                        calibration=st.lrt_calibration)
                bounds[i] = ci.lower, ci.upper
            except LROError:
                failed += 1
        out["ci"][method] = bounds
        out["fail"][method] = failed
    return out


@dataclass
class MonteCarloReport:
    """Per-cell Monte Carlo summaries, keyed by ``(n, z, method)``."""

    scenario: Scenario
    settings: StudySettings
    cells: dict = field(default_factory=dict)
    run_metrics: dict = field(default_factory=dict)

    def metric(self, n: int, z: float, method: str, name: str) -> float:
        return self.cells[(n, round(float(z), 10), method)][name]

    def rows(self):
        """Long-format rows ``(scenario, n, z, method, metric, value)``."""
        out = []
        for (n, z, method), metrics in sorted(self.cells.items()):
            for name, value in metrics.items():
                out.append((self.scenario.kind, n, repr(z), method, name, _fmt(value)))
        for (n, name), value in sorted(self.run_metrics.items()):
            out.append((self.scenario.kind, n, "all", "mle", name, _fmt(value)))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", "n", "z", "method", "metric", "value"])
        w.writerows(self.rows())
        return buf.getvalue()

    def summary(self) -> dict:
        st = self.settings
        cells = [
            {"n": n, "z": z, "method": method,
             **{k: inference._num(v) for k, v in metrics.items()}}
            for (n, z, method), metrics in sorted(self.cells.items())
        ]
        return {
            "scenario": {"kind": self.scenario.kind, "pi0": self.scenario.pi0,
                         "rate_x": self.scenario.rate_x, "rate_y": self.scenario.rate_y,
                         "eval_grid": list(self.scenario.eval_grid),
                         "boundary": list(self.scenario.boundary)},
            "settings": {"n_list": list(st.n_list), "replications": st.replications,
                         "methods": list(st.methods), "seed": st.seed, "level": st.level,
                         "m": st.m, "lrt_calibration": st.lrt_calibration},
            "run": {f"{n}:{k}": inference._num(v) for (n, k), v in sorted(self.run_metrics.items())},
            "cells": cells,
        }


def _fmt(value) -> str:
    v = float(value)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _sd(a: np.ndarray) -> float:
    return float(np.std(a, ddof=1)) if len(a) > 1 else math.nan


def _estimator_metrics(est: np.ndarray, truth: float) -> dict:
    err = est - truth
    finite = np.isfinite(est)
    with np.errstate(invalid="ignore"):
        return {
            "mean": float(np.mean(est)),
            "bias": float(np.mean(err)),
            "sd": _sd(est) if finite.all() else (math.inf if len(est) > 1 else math.nan),
            "mse": float(np.mean(err ** 2)),
            "median_abs_error": float(np.median(np.abs(err))),
            "n_infinite": float(np.sum(~finite & ~np.isnan(est))),
        }


def _interval_metrics(bounds: np.ndarray, truth: float) -> dict:
    ok = ~np.isnan(bounds).any(axis=1)
    lo, hi = bounds[ok, 0], bounds[ok, 1]
    width = hi - lo
    return {
        "coverage": float(np.mean((lo <= truth) & (truth <= hi))) if ok.any() else math.nan,
        "mean_width": float(np.mean(width)) if ok.any() else math.nan,
        "median_width": float(np.median(width)) if ok.any() else math.nan,
        "n_valid": float(ok.sum()),
        "n_failed": float((~ok).sum()),
    }


def run_study(s: Scenario, settings: StudySettings, threads: int = 1, progress=None,
              fstar_check: bool | None = None) -> MonteCarloReport:
    """Run ``settings.replications`` replications at each ``n`` and summarise.

    Interval failures (unsupported or undefined points) are counted in the
    ``n_failed`` metric, never dropped silently.  ``progress`` is called
    with ``(n, done, total)``.
    """
    if fstar_check is None:
        fstar_check = s.kind == "discrete-poisson"
    grid = np.asarray(s.eval_grid, dtype=float)
    truth = np.array([true_theta(s, z) for z in grid])
    report = MonteCarloReport(s, settings)
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for n in settings.n_list:
            tasks = [(s, n, rep, settings, fstar_check) for rep in range(settings.replications)]
            results = pool.map(_replicate, tasks, chunksize=8) if pool else map(_replicate, tasks)
            collected = []
            for i, r in enumerate(results, 1):
                collected.append(r)
                if progress:
                    progress(n, i, settings.replications)
            _summarise(report, s, n, grid, truth, collected, fstar_check)
    finally:
        if pool:
            pool.shutdown()
    return report


def _summarise(report, s, n, grid, truth, results, fstar_check) -> None:
    est_names = list(results[0]["est"])
    ci_names = list(results[0]["ci"])
    ests = {k: np.array([r["est"][k] for r in results]) for k in est_names}
    cis = {k: np.array([r["ci"][k] for r in results]) for k in ci_names}
    for i, z in enumerate(grid):
        zkey = round(float(z), 10)
        mle_mse = None
        for name in est_names:
            metrics = _estimator_metrics(ests[name][:, i], truth[i])
            if name == "mle":
                mle_mse = metrics["mse"]
                metrics["boundary"] = float(zkey in s.boundary)
                asym = asymptotic_sd(s, zkey)
                if asym is not None:
                    rate, sd = asym
                    metrics["asymptotic_sd"] = sd
                    metrics["sd_ratio"] = n ** rate * metrics["sd"] / sd
            with np.errstate(invalid="ignore", divide="ignore"):
                metrics["mse_ratio"] = float(np.float64(metrics["mse"]) / mle_mse)
            report.cells[(n, zkey, name)] = metrics
        for name in ci_names:
            key = (n, zkey, name if name != "split" else "split-ci")
            report.cells[key] = _interval_metrics(cis[name][:, i], truth[i])
    if fstar_check:
        report.run_metrics[(n, "frac_fstar_equals_fn")] = float(
            np.mean([r["fstar_equals_fn"] for r in results])
        )
    report.run_metrics[(n, "replications")] = float(len(results))


# -- config ----------------------------------------------------------------

_LIST_KEYS = {"n", "methods", "grid"}


def parse_config(text: str) -> tuple[Scenario, StudySettings]:
    """Parse a ``key = value`` scenario file.

    Recognised keys: ``kind``, ``pi0``, ``rate_x``, ``rate_y``, ``grid``,
    ``n``, ``replications``, ``methods``, ``seed``, ``level``, ``m``,
    ``lrt_calibration``.  ``#`` starts a comment; lists are comma separated.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"config line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        raw[key] = value
    if "kind" not in raw:
        raise InvalidInputError("config is missing 'kind'")
    known = {"kind", "pi0", "rate_x", "rate_y", "grid", "n", "replications", "methods",
             "seed", "level", "m", "lrt_calibration"}
    unknown = set(raw) - known
    if unknown:
        raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")

    def items(key):
        return [v.strip() for v in raw[key].split(",") if v.strip()]

    params: dict = {}
    for key in ("pi0", "rate_x", "rate_y"):
        if key in raw:
            params[key] = float(raw[key])
    if "grid" in raw:
        params["eval_grid"] = [float(v) for v in items("grid")]
    if raw["kind"] == "mixed":
        for key in ("rate_x", "rate_y"):
            params.pop(key, None)
    scenario = make_scenario(raw["kind"], **params)
    settings = StudySettings(
        n_list=tuple(int(v) for v in items("n")) if "n" in raw else (500,),
        replications=int(raw.get("replications", 500)),
        methods=tuple(items("methods")) if "methods" in raw else ("mle",),
        seed=int(raw.get("seed", 0)),
        level=float(raw.get("level", 0.95)),
        m=int(raw.get("m", 5)),
        lrt_calibration=raw.get("lrt_calibration", "pivotal"),
    )
    return scenario, settings
