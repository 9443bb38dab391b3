"""Uniform-grid spatial hashing for exact strict-radius neighbor queries.

Cell size defaults to the query radius so a query only has to look at the
3^d surrounding cells.  Queries are exact: candidates from neighboring
cells are filtered by the strict Euclidean distance test |x - c| < r.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidInputError


class SpatialIndex:
    """Immutable after construction; safe for concurrent read-only queries."""

    def __init__(self, positions, cell_size):
        if not (cell_size > 0):
            raise InvalidInputError("cell_size must be positive")
        positions = np.asarray(positions, dtype=float)
        if positions.ndim == 1:
            positions = positions.reshape(-1, 1)
        if positions.size == 0:
            positions = positions.reshape(0, positions.shape[1] if positions.ndim == 2 else 1)
        if not np.all(np.isfinite(positions)):
            raise InvalidInputError("positions must be finite")
        self.positions = positions
        self.cell_size = float(cell_size)
        self.dim = positions.shape[1]
        self._cells: dict[tuple, np.ndarray] = {}
        if len(positions):
            keys = np.floor(positions / self.cell_size).astype(np.int64)
            order = np.lexsort(keys.T[::-1])
            sorted_keys = keys[order]
            change = np.any(np.diff(sorted_keys, axis=0) != 0, axis=1)
            starts = np.concatenate(([0], np.nonzero(change)[0] + 1, [len(order)]))
            for a, b in zip(starts[:-1], starts[1:]):
                idx = np.sort(order[a:b])
                self._cells[tuple(sorted_keys[a])] = idx

    @property
    def n_occupied_cells(self):
        return len(self._cells)

    def query_radius(self, center, r):
        """Indices j with |x_j - center| < r (strict), as a sorted array."""
        if not (r > 0):
            raise InvalidInputError("r must be positive")
        center = np.asarray(center, dtype=float).reshape(-1)
        if len(center) != self.dim:
            raise InvalidInputError(f"center has dim {len(center)}, index has dim {self.dim}")
        if not self._cells:
            return np.empty(0, dtype=np.int64)
        reach = int(math.ceil(r / self.cell_size))
        base = np.floor(center / self.cell_size).astype(np.int64)
        chunks = []
        for offset in np.ndindex(*([2 * reach + 1] * self.dim)):
            key = tuple(base + np.asarray(offset) - reach)
            idx = self._cells.get(key)
            if idx is not None:
                chunks.append(idx)
        if not chunks:
            return np.empty(0, dtype=np.int64)
        cand = np.concatenate(chunks)
        d2 = ((self.positions[cand] - center) ** 2).sum(axis=1)
        hit = cand[d2 < r * r]
        hit.sort()
        return hit


def build_index(positions, cell_size):
    return SpatialIndex(positions, cell_size)


def query_radius(index, center, r):
    return index.query_radius(center, r)


def brute_force_radius(positions, center, r):
    """Reference O(N) scan used by the test oracles."""
    positions = np.asarray(positions, dtype=float)
    if positions.ndim == 1:
        positions = positions.reshape(-1, 1)
    if len(positions) == 0:
        return np.empty(0, dtype=np.int64)
    center = np.asarray(center, dtype=float).reshape(-1)
    d2 = ((positions - center) ** 2).sum(axis=1)
    return np.nonzero(d2 < r * r)[0].astype(np.int64)
