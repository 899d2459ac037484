"""
Stochastic Allocation Service

This module provides the random allocation primitives shared by the job market
and the goods market. Both markets are quantity-rationed: a fixed number of
unit slots (job openings, goods, unit demands) is spread over bins (firms or
agents) so that every unit slot has the same chance of being chosen.

Features:
- Unbiased stochastic rounding of real-valued targets to integer quantities
- Exact multivariate hypergeometric allocation without replacement
- Uniform draws for margins and entrant sizes

All functions take an explicit ``numpy.random.Generator`` and keep no state, so
they are safe to use from independent runs in parallel.

Example Usage:
    from src.services.markets import stochastic_round, allocate_without_replacement

    rng = np.random.default_rng(7)
    hires = allocate_without_replacement(AllocationRequest([100, 100], 100), rng)
"""

from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np


INTEGER_SNAP = 1e-9


class AllocationError(ValueError):
    """Raised when an allocation or draw request violates its preconditions."""
    pass


@dataclass(frozen=True)
class AllocationRequest:
    """Unit slots to allocate over weighted bins.

    Args:
        weights (Sequence[int]): Non-negative integer capacity of every bin
            (openings per firm, goods per firm or unit demands per agent)
        total_to_allocate (int): Number of unit slots to choose, at most the
            sum of the weights
    """
    weights: Union[Sequence[int], np.ndarray]
    total_to_allocate: int

    def as_array(self) -> np.ndarray:
        """Validate the request and return the weights as an int64 array."""
        weights = np.asarray(self.weights, dtype=np.int64)
        if weights.ndim != 1:
            raise AllocationError("weights must be one-dimensional")
        if np.any(weights < 0):
            raise AllocationError("weights must be non-negative")
        if self.total_to_allocate < 0:
            raise AllocationError("total_to_allocate must be non-negative")
        if self.total_to_allocate > int(weights.sum()):
            raise AllocationError(
                f"cannot allocate {self.total_to_allocate} slots over {int(weights.sum())} available"
            )
        return weights


def stochastic_round(x: float, rng: np.random.Generator) -> int:
    """Round ``x`` to floor(x) or floor(x)+1 so that the expectation is x.

    Args:
        x (float): Non-negative real target
        rng (np.random.Generator): Random stream

    Returns:
        int: floor(x) + Bernoulli(frac(x))

    Raises:
        AllocationError: If x is negative or not finite
    """
    if not np.isfinite(x) or x < -INTEGER_SNAP:
        raise AllocationError(f"stochastic_round needs a finite non-negative value, got {x}")
    nearest = round(x)
    # 90 / 0.9 evaluates to 100.00000000000001; such targets are integers
    if abs(x - nearest) <= INTEGER_SNAP:
        return int(nearest)
    base = int(np.floor(x))
    frac = x - base
    # integer input consumes no draw
    if frac == 0.0:
        return base
    return base + int(rng.random() < frac)


def stochastic_round_array(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized ``stochastic_round`` over an array of non-negative values.

    One uniform draw is consumed per element, integer or not.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return np.zeros(0, dtype=np.int64)
    if not np.all(np.isfinite(values)) or np.any(values < -INTEGER_SNAP):
        raise AllocationError("stochastic_round_array needs finite non-negative values")
    nearest = np.round(values)
    values = np.where(np.abs(values - nearest) <= INTEGER_SNAP, nearest, values)
    base = np.floor(values)
    frac = values - base
    bumps = rng.random(values.shape) < frac
    return base.astype(np.int64) + bumps.astype(np.int64)


def allocate_without_replacement(req: AllocationRequest, rng: np.random.Generator) -> np.ndarray:
    """Choose ``req.total_to_allocate`` of the unit slots uniformly, without replacement.

    The per-bin counts follow the multivariate hypergeometric distribution:
    every one of the sum(weights) unit slots is equally likely to be chosen,
    so E[k_i] = weight_i * total / sum(weights) and the counts sum to the total
    exactly. Sampling is sequential conditional hypergeometric ("marginals"):
    bin i receives Hypergeometric(remaining_total, weight_i, remaining_weight),
    which is linear in the number of bins.

    Args:
        req (AllocationRequest): Weights and number of slots to choose
        rng (np.random.Generator): Random stream

    Returns:
        np.ndarray: int64 counts, one per bin, with 0 <= k_i <= weight_i

    Raises:
        AllocationError: If the request is invalid (total > sum of weights)
    """
    weights = req.as_array()
    total = int(req.total_to_allocate)
    if weights.size == 0 or total == 0:
        return np.zeros(weights.size, dtype=np.int64)
    if total == int(weights.sum()):
        return weights.copy()
    return rng.multivariate_hypergeometric(weights, total, method="marginals").astype(np.int64)


def draw_uniform(lo: float, hi: float, rng: np.random.Generator) -> float:
    """Draw a real uniformly on [lo, hi]; lo == hi returns the constant."""
    if lo > hi:
        raise AllocationError(f"draw_uniform needs lo <= hi, got [{lo}, {hi}]")
    if lo == hi:
        return float(lo)
    return float(rng.uniform(lo, hi))


def draw_uniform_int(lo: int, hi: int, rng: np.random.Generator) -> int:
    """Draw an integer uniformly on the closed range [lo, hi]."""
    if lo > hi:
        raise AllocationError(f"draw_uniform_int needs lo <= hi, got [{lo}, {hi}]")
    return int(rng.integers(lo, hi, endpoint=True))


def shuffled(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random order of the indices 0..n-1."""
    return rng.permutation(n)


def split_counts(order: np.ndarray, counts: List[int]) -> List[np.ndarray]:
    """Cut ``order`` into consecutive chunks of the given sizes."""
    bounds = np.cumsum([0] + list(counts))
    return [order[bounds[i]:bounds[i + 1]] for i in range(len(counts))]
