"""Lattice geometry: site indexing, distance-based neighborhoods and pair cliques.

Sites are numbered in C order over ``dims``, so for a 3D lattice stored as
``(depth, rows, cols)`` the last (x) axis varies fastest.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, NamedTuple, Sequence

import numpy as np

__all__ = [
    "LatticeShape",
    "NeighborhoodSpec",
    "PairClique",
    "neighbors",
    "pair_cliques",
    "half_offsets",
    "clique_count",
    "DEFAULT_ORDER",
]

DEFAULT_ORDER = 2


@dataclass(frozen=True)
class LatticeShape:
    """Site counts per axis (numpy order, slowest axis first) plus voxel spacing.

    Spacing is metadata only; neighborhoods are built on index coordinates.
    """

    dims: tuple[int, ...]
    spacing: tuple[float, ...] = field(default=())

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) not in (2, 3):
            raise ValueError(f"lattice must be 2D or 3D, got dims={dims}")
        if any(d < 1 for d in dims):
            raise ValueError(f"lattice dims must be positive, got {dims}")
        spacing = tuple(float(s) for s in self.spacing) if self.spacing else (1.0,) * len(dims)
        if len(spacing) != len(dims):
            raise ValueError("spacing must have one entry per axis")
        if not all(s > 0 and math.isfinite(s) for s in spacing):
            raise ValueError(f"spacing must be strictly positive, got {spacing}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        """Total number of sites M."""
        return math.prod(self.dims)

    def coords(self, s: int) -> tuple[int, ...]:
        if not 0 <= s < self.size:
            raise IndexError(f"site index {s} out of range for {self.size} sites")
        return tuple(int(c) for c in np.unravel_index(s, self.dims))

    def index(self, coords: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(coords), self.dims))


class PairClique(NamedTuple):
    s: int
    t: int


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Order-``r`` neighborhood: t is a neighbor of s iff 0 < |s - t|^2 <= r^2."""

    order: int
    shape: LatticeShape

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"neighborhood order must be a positive integer, got {self.order}")
        object.__setattr__(self, "order", int(self.order))


@lru_cache(maxsize=None)
def _all_offsets(order: int, ndim: int) -> tuple[tuple[int, ...], ...]:
    r2 = order * order
    rng = range(-order, order + 1)
    return tuple(
        d for d in itertools.product(rng, repeat=ndim)
        if 0 < sum(c * c for c in d) <= r2
    )


@lru_cache(maxsize=None)
def half_offsets(order: int, ndim: int) -> tuple[tuple[int, ...], ...]:
    """Neighbor offsets whose flat-index step is positive (first nonzero component > 0).

    Each unordered neighbor pair {s, t} corresponds to exactly one of these
    offsets applied to the smaller index.
    """
    return tuple(d for d in _all_offsets(order, ndim) if next(c for c in d if c != 0) > 0)


def _overlap_slices(dims, offset):
    """Slices (a, b) so that ``arr[a]`` and ``arr[b]`` hold sites s and s + offset."""
    src, dst = [], []
    for n, d in zip(dims, offset):
        if d >= 0:
            src.append(slice(0, max(n - d, 0)))
            dst.append(slice(d, n))
        else:
            src.append(slice(-d, n))
            dst.append(slice(0, max(n + d, 0)))
    return tuple(src), tuple(dst)


def clique_count(spec: NeighborhoodSpec) -> int:
    """Number of pair cliques, computed from per-offset overlaps."""
    total = 0
    for d in half_offsets(spec.order, spec.shape.ndim):
        total += math.prod(max(n - abs(c), 0) for n, c in zip(spec.shape.dims, d))
    return total


def neighbors(spec: NeighborhoodSpec, s: int) -> list[int]:
    """Sites within squared index distance ``order**2`` of ``s``, ascending.

    Raises
    ------
    IndexError
        If ``s`` is not a valid site index.
    """
    shape = spec.shape
    here = shape.coords(s)
    out = []
    for d in _all_offsets(spec.order, shape.ndim):
        c = tuple(a + b for a, b in zip(here, d))
        if all(0 <= ci < n for ci, n in zip(c, shape.dims)):
            out.append(shape.index(c))
    out.sort()
    return out


def pair_cliques(spec: NeighborhoodSpec) -> Iterator[PairClique]:
    """Yield every unordered neighbor pair once, as ``PairClique(s, t)`` with s < t.

    Pairs come grouped by offset, and in ascending ``s`` within each group.
    """
    dims = spec.shape.dims
    idx = np.arange(spec.shape.size).reshape(dims)
    for d in half_offsets(spec.order, spec.shape.ndim):
        a, b = _overlap_slices(dims, d)
        for s, t in zip(idx[a].ravel().tolist(), idx[b].ravel().tolist()):
            yield PairClique(s, t)


def count_label_matches(labels: np.ndarray, spec: NeighborhoodSpec) -> int:
    """Number of pair cliques whose two sites carry the same label.

    ``labels`` is shaped like the lattice (``spec.shape.dims``).
    """
    total = 0
    for d in half_offsets(spec.order, spec.shape.ndim):
        a, b = _overlap_slices(spec.shape.dims, d)
        total += int(np.count_nonzero(labels[a] == labels[b]))
    return total
