"""Simulation scenarios with known dose-response truth and the replicate benchmark.

Covariates are iid Uniform[-1, 1]. Doses are Uniform[0, 2] in scenarios 1
and 2 (randomized) and covariate-dependent truncated normals on [0, 2] in
scenarios 3 and 4. Outcomes add N(0, noise_sd^2) noise to the mean.

Random streams: every dataset draws from a PCG64 generator seeded with a
``numpy.random.SeedSequence`` built from ``(seed, scenario, n, replicate)``;
the training and test sets of a replicate use the two children of that
sequence. Results are therefore identical across platforms and worker
counts.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import BenchmarkFailedError, NumericalError, ParameterError, UnknownScenarioError
from .model import Dataset, SimslConfig, fit_simsl

logger = logging.getLogger(__name__)

DEFAULT_P = {1: 30, 2: 10, 3: 10, 4: 10}
MIN_P = {1: 3, 2: 7, 3: 7, 4: 7}
DOSE_RANGE = (0.0, 2.0)


def truncnorm_sample(mu, lo, hi, sigma, rng: np.random.Generator, size=None):
    """Inverse-CDF draws from a normal(mu, sigma) truncated to [lo, hi].

    Uniforms are drawn between the CDF values of the bounds; for bounds in
    the upper tail the reflected problem is sampled instead so that the CDF
    interval keeps its precision. When the interval underflows to zero width
    the draw is clamped to the nearer bound and a ``RuntimeWarning`` reports
    how many draws were clamped.
    """
    mu, lo, hi, sigma = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu, lo, hi, sigma)))
    if np.any(lo >= hi):
        raise ParameterError("truncation bounds need lo < hi")
    if np.any(sigma <= 0):
        raise ParameterError("sigma must be positive")
    shape = mu.shape if size is None else np.broadcast_shapes(mu.shape, tuple(np.atleast_1d(size)))
    mu, lo, hi, sigma = (np.broadcast_to(v, shape) for v in (mu, lo, hi, sigma))

    alpha = (lo - mu) / sigma
    beta = (hi - mu) / sigma
    flip = alpha > 0
    # sample -Z on [-beta, -alpha] when the window sits in the upper tail
    a_ = np.where(flip, -beta, alpha)
    b_ = np.where(flip, -alpha, beta)
    cdf_a, cdf_b = ndtr(a_), ndtr(b_)
    u = rng.uniform(size=shape)
    z = ndtri(cdf_a + u * (cdf_b - cdf_a))
    z = np.where(flip, -z, z)
    out = mu + sigma * z

    bad = ~(cdf_b > cdf_a) | ~np.isfinite(out)
    if np.any(bad):
        nearest = np.where(np.abs(mu - lo) <= np.abs(mu - hi), lo, hi)
        out = np.where(bad, nearest, out)
        warnings.warn(f"truncated normal: {int(bad.sum())} draw(s) clamped to a bound", RuntimeWarning, stacklevel=2)
    out = np.clip(out, lo, hi)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# scenario formulas


def f_opt_s1(x):
    x = np.asarray(x, dtype=float)
    return 1 + 0.5 * x[:, 0] + 0.5 * x[:, 1]


def f_opt_s2(x):
    x = np.asarray(x, dtype=float)
    x1 = x[:, 0]
    step = np.where((x1 > -0.5) & (x1 < 0.5), 0.6, 1.2)
    return step + x[:, 3] ** 2 + 0.5 * np.log(np.abs(x[:, 6]) + 1) - 0.6


def mean_s1(x, a):
    x = np.asarray(x, dtype=float)
    return 8 + 4 * x[:, 0] - 2 * x[:, 1] - 2 * x[:, 2] - 25 * (f_opt_s1(x) - np.asarray(a)) ** 2


def mean_s2(x, a):
    x = np.asarray(x, dtype=float)
    return (
        8
        + 4 * np.cos(2 * np.pi * x[:, 1])
        - 2 * x[:, 3]
        - 8 * x[:, 4] ** 3
        - 15 * np.abs(f_opt_s2(x) - np.asarray(a))
    )


def _dose_randomized(x, rng):
    return rng.uniform(*DOSE_RANGE, size=x.shape[0])


def _dose_s3(x, rng):
    neg = x[:, 2] < 0
    mu = np.where(neg, -0.5 + 0.5 * x[:, 0] + 0.5 * x[:, 1], np.abs(0.5 + 1.5 * x[:, 1]))
    sigma = np.where(neg, 0.5, 1.0)
    return truncnorm_sample(mu, 0.0, 2.0, sigma, rng)


def _dose_s4(x, rng):
    return truncnorm_sample(f_opt_s2(x), 0.0, 2.0, 0.5, rng)


@dataclass(frozen=True)
class _Truth:
    mean: Callable
    f_opt: Callable
    dose: Callable


SCENARIOS = {
    1: _Truth(mean_s1, f_opt_s1, _dose_randomized),
    2: _Truth(mean_s2, f_opt_s2, _dose_randomized),
    3: _Truth(mean_s2, f_opt_s2, _dose_s3),
    4: _Truth(mean_s2, f_opt_s2, _dose_s4),
}


def _truth(scenario: int) -> _Truth:
    try:
        return SCENARIOS[int(scenario)]
    except (KeyError, ValueError):
        raise UnknownScenarioError(f"unknown scenario {scenario!r}; expected one of 1, 2, 3, 4") from None


def true_mean(scenario: int, x, a) -> np.ndarray:
    return _truth(scenario).mean(x, a)


def optimal_rule(scenario: int, x) -> np.ndarray:
    return _truth(scenario).f_opt(x)


def true_value_scenario(doses, x, scenario: int) -> float:
    """Average of the scenario's conditional mean at the given doses."""
    truth = _truth(scenario)
    x = np.asarray(x, dtype=float)
    if x.shape[1] < MIN_P[int(scenario)]:
        raise ParameterError(f"scenario {scenario} needs at least {MIN_P[int(scenario)]} covariates")
    return float(np.mean(truth.mean(x, np.asarray(doses, dtype=float))))


def augment_quadratic(x, names=None):
    """Append squared copies of the non-binary columns."""
    x = np.asarray(x, dtype=float)
    names = list(names) if names is not None else [f"X{j + 1}" for j in range(x.shape[1])]
    keep = [j for j in range(x.shape[1]) if np.unique(x[:, j]).size > 2]
    return np.hstack([x, x[:, keep] ** 2]), names + [f"{names[j]}^2" for j in keep]


@dataclass(frozen=True)
class ScenarioSpec:
    id: int
    n: int
    p: int | None = None
    augment: str | None = None
    noise_sd: float = 1.0

    def __post_init__(self):
        _truth(self.id)
        if self.p is None:
            object.__setattr__(self, "p", DEFAULT_P[self.id])
        if self.augment is None:
            object.__setattr__(self, "augment", "raw" if self.id == 1 else "quadratic")
        if self.augment not in ("raw", "quadratic"):
            raise ParameterError("augment must be 'raw' or 'quadratic'")
        if self.p < MIN_P[self.id]:
            raise ParameterError(f"scenario {self.id} needs p >= {MIN_P[self.id]}")
        if self.n < 2:
            raise ParameterError("n must be at least 2")


@dataclass(frozen=True)
class SimulatedData:
    dataset: Dataset
    x_raw: np.ndarray
    mean: Callable
    f_opt: Callable


def _generate(spec: ScenarioSpec, n: int, rng: np.random.Generator) -> SimulatedData:
    truth = _truth(spec.id)
    x = rng.uniform(-1.0, 1.0, size=(n, spec.p))
    a = truth.dose(x, rng)
    y = truth.mean(x, a) + spec.noise_sd * rng.standard_normal(n)
    if spec.augment == "quadratic":
        xf, names = augment_quadratic(x)
    else:
        xf, names = x, [f"X{j + 1}" for j in range(spec.p)]
    return SimulatedData(Dataset(y, a, xf, tuple(names)), x, truth.mean, truth.f_opt)


def gen_scenario(spec: ScenarioSpec, seed) -> SimulatedData:
    """Draw one dataset; ``seed`` may be an int, a SeedSequence or a Generator."""
    if isinstance(seed, np.random.Generator):
        rng = seed
    elif isinstance(seed, np.random.SeedSequence):
        rng = np.random.Generator(np.random.PCG64(seed))
    else:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    return _generate(spec, spec.n, rng)


# ---------------------------------------------------------------------------
# benchmark


@dataclass(frozen=True)
class ReplicateResult:
    scenario: int
    n: int
    replicate: int
    value: float
    converged: bool
    fit_seconds: float
    failed: bool = False


@dataclass(frozen=True)
class SummaryRow:
    scenario: int
    n: int
    mean_value: float
    sd_value: float
    replicates: int
    failures: int


@dataclass(frozen=True)
class BenchmarkResult:
    replicates: list
    summary: list


def run_replicate(spec: ScenarioSpec, replicate: int, seed: int, test_size: int = 5000,
                  config: SimslConfig | None = None, grid_size: int = 100) -> ReplicateResult:
    from .doserule import optimal_dose

    train_seq, test_seq = np.random.SeedSequence([int(seed), spec.id, spec.n, int(replicate)]).spawn(2)
    train = gen_scenario(spec, train_seq)
    test_rng = np.random.Generator(np.random.PCG64(test_seq))
    test = _generate(spec, test_size, test_rng)

    t0 = time.perf_counter()
    try:
        model = fit_simsl(train.dataset, config or SimslConfig())
    except NumericalError as exc:
        logger.warning("scenario %d n=%d replicate %d failed: %s", spec.id, spec.n, replicate, exc)
        return ReplicateResult(spec.id, spec.n, replicate, float("nan"), False, time.perf_counter() - t0, True)
    elapsed = time.perf_counter() - t0
    doses = optimal_dose(model, test.dataset.x, grid_size=grid_size)
    value = true_value_scenario(doses, test.x_raw, spec.id)
    return ReplicateResult(spec.id, spec.n, replicate, value, model.converged, elapsed)


def _run_job(args):
    return run_replicate(*args)


def summarize(results) -> list[SummaryRow]:
    cells: dict[tuple[int, int], list] = {}
    for r in results:
        cells.setdefault((r.scenario, r.n), []).append(r)
    rows = []
    for (scenario, n), rs in sorted(cells.items()):
        ok = [r.value for r in rs if not r.failed]
        k = len(ok)
        # exactly rounded sums make the reduction independent of result order
        s1, s2 = math.fsum(ok), math.fsum(v * v for v in ok)
        mean = s1 / k if k else float("nan")
        sd = float(np.sqrt(max(s2 - k * mean**2, 0.0) / (k - 1))) if k > 1 else float("nan")
        rows.append(SummaryRow(scenario, n, mean, sd, len(rs), len(rs) - k))
    return rows


def run_benchmark(specs, replicates: int, seed: int = 1, test_size: int = 5000,
                  config: SimslConfig | None = None, threads: int = 1, grid_size: int = 100) -> BenchmarkResult:
    """Fit, derive the dose rule and score it by the true value, per replicate and cell."""
    if replicates < 1:
        raise ParameterError("replicates must be at least 1")
    jobs = [(spec, r, seed, test_size, config, grid_size) for spec in specs for r in range(replicates)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    summary = summarize(results)
    for row in summary:
        if row.failures > 0.25 * row.replicates:
            raise BenchmarkFailedError(
                f"scenario {row.scenario} n={row.n}: {row.failures} of {row.replicates} replicates failed"
            )
    return BenchmarkResult(results, summary)
