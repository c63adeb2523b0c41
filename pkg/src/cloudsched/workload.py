"""Job arrival process: rate construction, bounded i.i.d. sampling, workload accounting.

A *rate matrix* is an (M, S) float array: expected arrivals per slot of jobs
that need a type-m VM for s slots (s = column index + 1). An *arrival batch*
is an (M, S) int array bounded by A_max.
"""

from __future__ import annotations

import numpy as np


class RateExceedsBoundError(ValueError):
    """Some entry of the rate matrix exceeds A_max, the per-slot arrival bound."""


def uniform_size_rates(L: int, rho: float, M: int, S: int) -> np.ndarray:
    """Rate matrix lambda[m,s] = L*rho*m/165, identical across sizes.

    Type-m jobs arrive in proportion to m; with S=10 equal-rate sizes the
    1/165 normalization puts rho=1 exactly on the stability boundary of the
    ten-server, three-type reference cluster.
    """
    if L < 1 or M < 1 or S < 1:
        raise ValueError("L, M, S must be >= 1")
    if rho < 0:
        raise ValueError("rho must be >= 0")
    m = np.arange(1, M + 1, dtype=np.float64)
    return np.repeat((L * rho * m / 165.0)[:, None], S, axis=1)


def workload_rate(rates: np.ndarray) -> np.ndarray:
    """Per-type expected workload per slot: (sum_s s*lambda[m,s])_m."""
    rates = np.asarray(rates, dtype=np.float64)
    s = np.arange(1, rates.shape[1] + 1, dtype=np.float64)
    return rates @ s


def sample_arrivals(rates: np.ndarray, a_max: int, rng: np.random.Generator) -> np.ndarray:
    """One slot of arrivals, independent Binomial(a_max, lambda/a_max) per cell.

    Mean is exactly lambda, support is [0, a_max], and P(0) > 0 whenever
    lambda < a_max.
    """
    rates = np.asarray(rates, dtype=np.float64)
    if a_max < 1:
        raise ValueError("a_max must be >= 1")
    if np.any(rates < 0):
        raise ValueError("rates must be >= 0")
    if np.any(rates > a_max):
        raise RateExceedsBoundError("rate entry exceeds a_max")
    return rng.binomial(a_max, rates / a_max).astype(np.int64)
