"""The placement array, its cost and gap count, and views over empty cells."""
from __future__ import annotations

import numpy as np

from .metric import MetricSpace


class CellOccupiedError(ValueError):
    pass


class PlacementArray:
    """Fixed-length array of optional PointIds; each cell is written once.

    The gap count (maximal runs of empty cells) is maintained incrementally.
    """

    def __init__(self, n: int):
        if n < 0:
            raise ValueError("array length must be non-negative")
        self.cells: list = [None] * n
        self.filled = 0
        self._gaps = 1 if n else 0

    def __len__(self) -> int:
        return len(self.cells)

    def __repr__(self) -> str:
        return f"PlacementArray(n={len(self)}, filled={self.filled}, gaps={self._gaps})"

    @property
    def gaps(self) -> int:
        return self._gaps

    @property
    def full(self) -> bool:
        return self.filled == len(self.cells)

    def is_empty(self, i: int) -> bool:
        return self.cells[i] is None

    def place(self, i: int, x: int) -> None:
        cells = self.cells
        n = len(cells)
        if not 0 <= i < n:
            raise IndexError(f"cell {i} outside array of length {n}")
        if cells[i] is not None:
            raise CellOccupiedError(f"cell {i} already holds point {cells[i]}")
        left_empty = i > 0 and cells[i - 1] is None
        right_empty = i + 1 < n and cells[i + 1] is None
        if left_empty and right_empty:
            self._gaps += 1
        elif not left_empty and not right_empty:
            self._gaps -= 1
        cells[i] = x
        self.filled += 1

    def empty_view(self) -> "ArrayView":
        return ArrayView(self, [i for i, c in enumerate(self.cells) if c is None])

    def to_json(self) -> list:
        return list(self.cells)


class ArrayView:
    """The empty cells of a parent array, seen as one contiguous array.

    ``index_map[i]`` is the parent index of view cell ``i``; ``root_map``
    composes the maps down to the underlying :class:`PlacementArray`.
    """

    def __init__(self, parent, index_map):
        self.parent = parent
        self.index_map = list(index_map)
        if isinstance(parent, ArrayView):
            self.root = parent.root
            pm = parent.root_map
            self.root_map = [pm[j] for j in self.index_map]
        else:
            self.root = parent
            self.root_map = self.index_map

    def __len__(self) -> int:
        return len(self.index_map)

    def __repr__(self) -> str:
        return f"ArrayView(n={len(self)}, root={self.root!r})"

    @property
    def cells(self) -> list:
        rc = self.root.cells
        return [rc[j] for j in self.root_map]

    @property
    def gaps(self) -> int:
        return gaps(self)

    def is_empty(self, i: int) -> bool:
        return self.root.cells[self.root_map[i]] is None

    def place(self, i: int, x: int) -> None:
        if not 0 <= i < len(self.root_map):
            raise IndexError(f"cell {i} outside view of length {len(self.root_map)}")
        self.root.place(self.root_map[i], x)

    def empty_view(self) -> "ArrayView":
        rc = self.root.cells
        return ArrayView(self, [i for i, j in enumerate(self.root_map) if rc[j] is None])


def place(A, i: int, x: int) -> None:
    A.place(i, x)


def empty_view(A) -> ArrayView:
    return A.empty_view()


def gaps(A) -> int:
    """Number of maximal runs of empty cells."""
    if isinstance(A, PlacementArray):
        return A.gaps
    count = 0
    prev_empty = False
    for c in A.cells:
        empty = c is None
        if empty and not prev_empty:
            count += 1
        prev_empty = empty
    return count


def cost(A, space: MetricSpace) -> float:
    """Sum of distances over adjacent pairs of occupied cells."""
    cells = A.cells
    left, right = [], []
    for a, b in zip(cells, cells[1:]):
        if a is not None and b is not None:
            left.append(a)
            right.append(b)
    if not left:
        return 0.0
    legs = space.pair_distances(left, right)
    # cumsum accumulates left to right, matching a plain sequential loop
    return float(np.cumsum(legs)[-1])
