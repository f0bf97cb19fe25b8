"""Replicated-experiment runner and ensemble comparison statistics."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

__all__ = [
    "ExperimentResult",
    "run_replicated",
    "batch_means_se",
    "CdfDistance",
    "cdf_distance",
    "ks_two_sample_critical",
]


@dataclass
class ExperimentResult:
    name: str
    parameters: Dict
    estimate: float
    standard_error: Optional[float]
    n_effective: int
    n_failures: int
    seeds: Sequence[int]
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "parameters": dict(self.parameters),
            "estimate": self.estimate,
            "standard_error": self.standard_error,
            "n_effective": self.n_effective,
            "n_failures": self.n_failures,
            "seeds": list(self.seeds),
            "wall_time": self.wall_time,
        }


def _replicate_seed(base_seed: int, index: int) -> int:
    # distinct, order-independent labels for per-replicate generator keys
    return (base_seed << 20) + index


def run_replicated(
    task: Callable[[int, int], float],
    n: int,
    base_seed: int,
    workers: int = 1,
    name: str = "experiment",
    parameters: Optional[Dict] = None,
) -> ExperimentResult:
    """Run task(index, seed) for n replicates and aggregate mean and error.

    Results are merged in replicate order, so the outcome is a deterministic
    function of (task, n, base_seed) regardless of the worker count.  A
    failing replicate is dropped and counted rather than aborting the run.
    """
    if n < 1:
        raise ValueError("need at least one replicate")
    seeds = [_replicate_seed(base_seed, i) for i in range(n)]
    t0 = time.perf_counter()
    values: list[Optional[float]] = [None] * n
    if workers <= 1:
        for i, s in enumerate(seeds):
            try:
                values[i] = float(task(i, s))
            except Exception:
                values[i] = None
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(task, i, s) for i, s in enumerate(seeds)]
            for i, fut in enumerate(futures):
                try:
                    values[i] = float(fut.result())
                except Exception:
                    values[i] = None
    good = np.array([v for v in values if v is not None], dtype=float)
    n_eff = len(good)
    estimate = float(good.mean()) if n_eff else float("nan")
    se = float(good.std(ddof=1) / math.sqrt(n_eff)) if n_eff > 1 else None
    return ExperimentResult(
        name=name,
        parameters=parameters or {},
        estimate=estimate,
        standard_error=se,
        n_effective=n_eff,
        n_failures=n - n_eff,
        seeds=seeds,
        wall_time=time.perf_counter() - t0,
    )


def batch_means_se(values: np.ndarray, n_batches: int = 32) -> float:
    """Standard error of the mean from batch means; robust to autocorrelation."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    n_batches = min(n_batches, n)
    if n_batches < 2:
        return float("nan")
    usable = (n // n_batches) * n_batches
    means = values[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


@dataclass
class CdfDistance:
    statistic: float
    effective_sample_size: float
    n_b: int


def cdf_distance(samples_a, weights_a, samples_b) -> CdfDistance:
    """Sup distance between a weighted and a plain empirical CDF.

    The effective sample size (sum w)^2 / sum w^2 quantifies how much the
    weight variance inflates the fluctuation of the weighted CDF; threshold
    calibration uses it in place of the raw count.
    """
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    wa = np.asarray(weights_a, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be nonempty")
    if wa.shape != a.shape or np.any(wa <= 0):
        raise ValueError("weights must be positive and match samples_a")

    order_a = np.argsort(a, kind="mergesort")
    a_sorted = a[order_a]
    wa_sorted = wa[order_a]
    cum_a = np.cumsum(wa_sorted)
    cum_a /= cum_a[-1]
    b_sorted = np.sort(b)

    grid = np.concatenate([a_sorted, b_sorted])
    fa = np.searchsorted(a_sorted, grid, side="right")
    f_a = np.where(fa > 0, cum_a[np.minimum(fa, len(a_sorted)) - 1], 0.0)
    f_a = np.where(fa == 0, 0.0, f_a)
    f_b = np.searchsorted(b_sorted, grid, side="right") / len(b_sorted)
    stat = float(np.max(np.abs(f_a - f_b)))

    ess = float(wa.sum() ** 2 / np.sum(wa**2))
    return CdfDistance(statistic=stat, effective_sample_size=ess, n_b=len(b))


def ks_two_sample_critical(alpha: float, n1: float, n2: float) -> float:
    """Asymptotic two-sample Kolmogorov-Smirnov critical value.

    c(alpha) * sqrt((n1 + n2)/(n1 n2)) with c = sqrt(-ln(alpha/2)/2); n1 may
    be an effective (non-integer) sample size.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    c = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    return c * math.sqrt((n1 + n2) / (n1 * n2))
