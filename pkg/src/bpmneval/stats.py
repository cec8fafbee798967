"""Confidence intervals and rank statistics used in the evaluation reports."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_RESAMPLES = 10_000


class InvalidCounts(ValueError):
    pass


class EmptyInput(ValueError):
    pass


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class Interval:
    point: float
    low: float
    high: float
    confidence: float
    # set when a percentile bootstrap interval does not contain its point estimate
    point_outside: bool = False


@dataclass(frozen=True)
class FriedmanResult:
    chi2: float
    df: int
    p_value: float
    w: float
    n_blocks: int
    k_treatments: int
    mean_ranks: tuple[float, ...] = ()


# Acklam's rational approximation for the standard normal quantile.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def normal_quantile(p: float) -> float:
    """Inverse CDF of the standard normal, refined with one Halley step."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    if p < _P_LOW:
        q = math.sqrt(-2 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1
        )
    elif p <= 1 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1
        )
    else:
        q = math.sqrt(-2 * math.log1p(-p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1
        )
    e = 0.5 * math.erfc(-x / math.sqrt(2)) - p
    u = e * math.sqrt(2 * math.pi) * math.exp(x * x / 2)
    return x - u / (1 + x * u / 2)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Interval:
    """Wilson score interval for a binomial proportion, no continuity correction."""
    if trials <= 0 or not 0 <= successes <= trials:
        raise InvalidCounts(f"need 0 <= successes <= trials and trials > 0, got {successes}/{trials}")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    z = normal_quantile(0.5 + confidence / 2)
    n = trials
    p_hat = successes / n
    z2 = z * z
    denom = 1 + z2 / n
    center = (p_hat + z2 / (2 * n)) / denom
    margin = z / denom * math.sqrt(p_hat * (1 - p_hat) / n + z2 / (4 * n * n))
    low = 0.0 if successes == 0 else max(0.0, center - margin)
    high = 1.0 if successes == trials else min(1.0, center + margin)
    return Interval(p_hat, low, high, confidence)


def _lower_gamma_series(a: float, x: float) -> float:
    term = total = 1.0 / a
    ap = a
    for _ in range(10_000):
        ap += 1
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_gamma_fraction(a: float, x: float) -> float:
    tiny = 1e-300
    b = x + 1 - a
    c = 1 / tiny
    d = 1 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1 / d
        delta = d * c
        h *= delta
        if abs(delta - 1) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_upper_gamma(a: float, x: float) -> float:
    if x <= 0:
        return 1.0
    if x < a + 1:
        return max(0.0, 1.0 - _lower_gamma_series(a, x))
    return min(1.0, _upper_gamma_fraction(a, x))


def chi_square_sf(x: float, df: int) -> float:
    """Upper tail probability of the chi-square distribution."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if x <= 0:
        return 1.0
    return regularized_upper_gamma(df / 2, x / 2)


def bootstrap_ci(
    values: Sequence[float],
    resamples: int = DEFAULT_RESAMPLES,
    confidence: float = 0.95,
    seed: int = 0,
) -> Interval:
    """Percentile bootstrap interval for the mean.

    The endpoints are order statistics of the sorted resample means, so
    the result is reproducible for a given seed and nested across
    confidence levels.
    """
    data = np.asarray(values, dtype=float)
    if data.size == 0:
        raise EmptyInput("bootstrap_ci needs at least one value")
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, data.size, size=(resamples, data.size))
    means = np.sort(data[idx].mean(axis=1))
    alpha = 1 - confidence
    lo_idx = min(resamples - 1, max(0, math.floor(alpha / 2 * resamples)))
    hi_idx = min(resamples - 1, max(lo_idx, math.ceil((1 - alpha / 2) * resamples) - 1))
    point = float(data.mean())
    low, high = float(means[lo_idx]), float(means[hi_idx])
    return Interval(point, low, high, confidence, point_outside=not low <= point <= high)


def rank_with_ties(row: Sequence[float]) -> list[float]:
    """1-based ranks, tied values share the mean of their positions."""
    order = sorted(range(len(row)), key=lambda i: row[i])
    ranks = [0.0] * len(row)
    start = 0
    while start < len(order):
        end = start
        while end + 1 < len(order) and row[order[end + 1]] == row[order[start]]:
            end += 1
        mid = (start + end) / 2 + 1
        for pos in range(start, end + 1):
            ranks[order[pos]] = mid
        start = end + 1
    return ranks


def kendalls_w(chi2: float, n_blocks: int, k_treatments: int) -> float:
    """Kendall's coefficient of concordance from a Friedman statistic."""
    denom = n_blocks * (k_treatments - 1)
    if denom <= 0:
        raise ShapeError("need n >= 1 and k >= 2")
    return chi2 / denom


def friedman_test(scores: Sequence[Sequence[float]]) -> FriedmanResult:
    """Friedman test over an n-blocks x k-treatments score matrix.

    Ranks are computed within each block with mid-ranks for ties and the
    statistic carries the usual tie correction. If every block is fully
    tied the statistic and W are 0 by convention.
    """
    matrix = [list(map(float, row)) for row in scores]
    n = len(matrix)
    k = len(matrix[0]) if matrix else 0
    if n < 2 or k < 2 or any(len(row) != k for row in matrix):
        raise ShapeError(f"need a rectangular matrix with n >= 2 blocks and k >= 2 treatments, got {n}x{k}")
    rank_sums = [0.0] * k
    tie_term = 0.0
    for row in matrix:
        ranks = rank_with_ties(row)
        for j, r in enumerate(ranks):
            rank_sums[j] += r
        for t in _tie_sizes(row):
            tie_term += t**3 - t
    correction = 1 - tie_term / (n * k * (k * k - 1))
    if correction <= 1e-12:
        chi2 = 0.0
    else:
        raw = 12.0 / (n * k * (k + 1)) * sum(r * r for r in rank_sums) - 3 * n * (k + 1)
        chi2 = max(0.0, raw / correction)
    df = k - 1
    return FriedmanResult(
        chi2=chi2,
        df=df,
        p_value=chi_square_sf(chi2, df),
        w=kendalls_w(chi2, n, k),
        n_blocks=n,
        k_treatments=k,
        mean_ranks=tuple(r / n for r in rank_sums),
    )


def _tie_sizes(row: Sequence[float]) -> list[int]:
    counts: dict[float, int] = {}
    for v in row:
        counts[v] = counts.get(v, 0) + 1
    return [c for c in counts.values() if c > 1]
