"""Partitions of coordinate indices into the groups that share one step size."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class Partition:
    """Total assignment of d coordinates to c disjoint, non-empty subsets."""

    d: int
    c: int
    assignment: np.ndarray  # (d,) int64, values in [0, c)
    subset_sizes: np.ndarray  # (c,) int64

    def __post_init__(self):
        if self.assignment.shape != (self.d,):
            raise ValueError("assignment length must equal d")
        if int(self.subset_sizes.sum()) != self.d:
            raise ValueError("subset sizes must sum to d")
        if np.any(self.subset_sizes <= 0):
            raise ValueError("all subsets must be non-empty")


def _from_assignment(assignment: np.ndarray) -> Partition:
    assignment = np.ascontiguousarray(assignment, dtype=np.int64)
    c = int(assignment.max()) + 1 if assignment.size else 0
    sizes = np.bincount(assignment, minlength=c)
    return Partition(d=assignment.size, c=c, assignment=assignment, subset_sizes=sizes)


def equipartition(d: int, k: int) -> Partition:
    """Consecutive blocks of size k; requires k | d."""
    if k < 1:
        raise ValueError("subset size k must be >= 1")
    if d % k != 0:
        raise ValueError(f"subset size k={k} does not divide d={d}")
    return _from_assignment(np.repeat(np.arange(d // k, dtype=np.int64), k))


def ragged_equipartition(d: int, k: int) -> Partition:
    """Consecutive blocks of size k; the last block may be smaller."""
    if k < 1:
        raise ValueError("subset size k must be >= 1")
    return _from_assignment(np.arange(d, dtype=np.int64) // k)


def sqrt_heuristic(d: int) -> Partition:
    """Subset size ~ sqrt(d)/2 for arbitrary 1D parameters (ragged)."""
    k = max(1, round(math.sqrt(d) / 2))
    return ragged_equipartition(d, k)


def heuristic_2d(m: int, n: int) -> Partition:
    """Group an m x n parameter (row-major) along its smaller dimension.

    For m >= n each row is a subset (state size m); otherwise each column is
    one (state size n).  Ties go to rows.
    """
    if m < 1 or n < 1:
        raise ValueError("shape dimensions must be positive")
    if m >= n:
        assignment = np.repeat(np.arange(m, dtype=np.int64), n)
    else:
        assignment = np.tile(np.arange(n, dtype=np.int64), m)
    return _from_assignment(assignment)


def singleton(d: int) -> Partition:
    """One subset for everything — the AdaGrad-Norm grouping (c=1)."""
    return _from_assignment(np.zeros(d, dtype=np.int64))


def coordinatewise(d: int) -> Partition:
    """Every coordinate its own subset — the AdaGrad-Coordinate grouping (c=d)."""
    return _from_assignment(np.arange(d, dtype=np.int64))


def subset_sqnorms(p: Partition, g: np.ndarray, sum_then_square: bool = False) -> np.ndarray:
    """Per-subset squared gradient norms: out[i] = sum_{j in subset i} g_j^2.

    ``sum_then_square`` is a compatibility mode that squares the per-subset
    coordinate sum instead of summing squares; it does not match the
    subset-norm definition and exists only for pseudocode-literal comparison.
    """
    g = np.asarray(g, dtype=np.float64).reshape(-1)
    if g.size != p.d:
        raise ValueError(f"gradient length {g.size} != partition d={p.d}")
    if sum_then_square:
        return kernels.segment_sums(g, p.assignment, p.c) ** 2
    return kernels.segment_sqnorms(g, p.assignment, p.c)
