"""Occupation-number bases for the antisymmetric sectors.

A sector basis enumerates the strictly increasing index tuples
(i_1 < ... < i_n) in lexicographic order; each tuple is also carried as a
bitmask for fast kernel arithmetic.  Lookup from bitmask to basis index
goes through a sorted-mask table (the lexicographic order of tuples does
not coincide with numeric mask order).
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

__all__ = ["SectorBasis", "sector_basis", "sector_dim"]


def sector_dim(modes: int, n: int) -> int:
    return math.comb(modes, n)


class SectorBasis:
    """Basis of the n-particle sector over ``modes`` one-body modes."""

    def __init__(self, modes: int, n: int):
        if not 0 <= n <= modes:
            raise ValueError(f"need 0 <= n <= modes, got n={n}, modes={modes}")
        if modes > 64:
            raise ValueError("states are uint64 bitmasks; at most 64 modes")
        self.modes = modes
        self.n = n
        self.states: tuple[tuple[int, ...], ...] = tuple(
            itertools.combinations(range(modes), n)
        )
        masks = np.zeros(len(self.states), dtype=np.uint64)
        for i, s in enumerate(self.states):
            m = 0
            for p in s:
                m |= 1 << p
            masks[i] = m
        self.masks = masks
        self._sorted = np.argsort(masks, kind="stable")
        self._sorted_masks = masks[self._sorted]

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of_mask(self, mask: int) -> int:
        pos = int(np.searchsorted(self._sorted_masks, np.uint64(mask)))
        return int(self._sorted[pos])

    def index_of(self, state: tuple[int, ...]) -> int:
        m = 0
        for p in state:
            m |= 1 << p
        return self.index_of_mask(m)

    def __len__(self) -> int:
        return self.dim

    def __repr__(self) -> str:
        return f"SectorBasis(modes={self.modes}, n={self.n}, dim={self.dim})"


@lru_cache(maxsize=None)
def sector_basis(modes: int, n: int) -> SectorBasis:
    return SectorBasis(modes, n)
