"""Online placers: Fill-Most-Blocks, its recursive completion, and a baseline.

Every placer follows the same online contract: construct it for an array of
length ``n``, then call :meth:`next` once per arriving point; it returns the
array index the point was placed in.  Decisions only depend on points seen so
far.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .arrays import PlacementArray
from .metric import REL_TOL, MetricSpace
from .nets import Net, increase_net
from .oracles import mst_weight


class InvariantError(AssertionError):
    """An invariant the analysis guarantees was violated (a bug, not bad input)."""


@dataclass(frozen=True)
class ResetEvent:
    step: int  # placements done in this FMB run when the reset fired
    points: int  # |X'| including the point just received
    mst: float
    previous_mst: float
    radius: float

    def to_dict(self) -> dict:
        return asdict(self)


def doubling_holds(mst: float, previous: float, rtol: float = REL_TOL) -> bool:
    return mst >= 2 * previous - rtol * 2 * previous


def block_lengths(n: int, blocks: int) -> list[int]:
    """``blocks`` contiguous lengths summing to ``n``, the first ``n % blocks`` one longer."""
    q, rem = divmod(n, blocks)
    return [q + 1] * rem + [q] * (blocks - rem)


class FmbState:
    """State of one Fill-Most-Blocks run over an array (or view) of length ``n``."""

    def __init__(self, n: int, space: MetricSpace, check_doubling: bool = True):
        if n < 0:
            raise ValueError("n must be non-negative")
        self.n = n
        self.space = space
        self.n1 = math.isqrt(n)
        self.n2 = 2 * self.n1
        self.limit = (n + 1) // 2
        lengths = block_lengths(n, self.n2) if n else []
        starts = [0] * len(lengths)
        for b in range(1, len(lengths)):
            starts[b] = starts[b - 1] + lengths[b - 1]
        self.block_start = starts
        self.block_len = lengths
        self.block_fill = [0] * len(lengths)
        self.block_owner: list = [None] * len(lengths)
        self.assignment: dict[int, int] = {}
        self.net = Net(0.0, [])
        self.received: list[int] = []
        self.mst_current = 0.0
        self.resets: list[ResetEvent] = []
        self.placements_done = 0
        self.check_doubling = check_doubling

    @property
    def done(self) -> bool:
        return self.placements_done >= self.limit

    def _reset(self, x: int) -> None:
        n1 = self.n1
        self.block_owner = [None] * self.n2
        self.assignment = {}
        previous = self.mst_current
        mst = mst_weight(self.space, self.received)
        if self.check_doubling and not doubling_holds(mst, previous):
            raise InvariantError(f"MST at reset {mst} is below twice the previous {previous}")
        self.mst_current = mst
        radius = 4 * mst / n1
        self.net = Net(radius, [x])
        self.resets.append(ResetEvent(self.placements_done, len(self.received), mst, previous, radius))

    def _free_block(self) -> int:
        fill, length, owner = self.block_fill, self.block_len, self.block_owner
        for b in range(self.n2):
            if owner[b] is None and fill[b] < length[b]:
                return b
        raise InvariantError("no unassigned non-full block is available")


def fmb_next(state: FmbState, A, x: int) -> int:
    """Place ``x`` into ``A`` following one round of Fill-Most-Blocks; return the index."""
    if state.placements_done >= state.limit:
        raise ValueError(f"Fill-Most-Blocks accepts only {state.limit} points for n={state.n}")
    space = state.space
    state.received.append(x)
    increase_net(state.net, x, space)
    if len(state.net.centers) > state.n1:
        state._reset(x)
    c = state.net.find_center(x, space)
    if c is None:
        raise InvariantError(f"point {x} is not covered by the net")
    b = state.assignment.get(c)
    if b is not None and state.block_fill[b] == state.block_len[b]:
        del state.assignment[c]
        state.block_owner[b] = None
        b = None
    if b is None:
        b = state._free_block()
        state.assignment[c] = b
        state.block_owner[b] = c
    i = state.block_start[b] + state.block_fill[b]
    A.place(i, x)
    state.block_fill[b] += 1
    state.placements_done += 1
    return i


class OnlinePlacer:
    name = "base"

    def __init__(self, n: int, space: MetricSpace, array=None):
        if array is None:
            array = PlacementArray(n)
        elif len(array) != n:
            raise ValueError(f"array has length {len(array)}, expected {n}")
        self.n = n
        self.space = space
        self.array = array
        self.calls = 0

    @property
    def capacity(self) -> int:
        return self.n

    @property
    def resets(self) -> list:
        return []

    def next(self, x: int) -> int:
        raise NotImplementedError

    def run(self, stream) -> "OnlinePlacer":
        stream = list(stream)
        if len(stream) != self.capacity:
            raise ValueError(f"{self.name} expects a stream of {self.capacity} points, got {len(stream)}")
        for x in stream:
            self.next(x)
        return self


class FillMostBlocks(OnlinePlacer):
    """Places the first ``ceil(n/2)`` points only."""

    name = "fmb-half"

    def __init__(self, n, space, array=None, check_doubling=True):
        super().__init__(n, space, array)
        self.state = FmbState(n, space, check_doubling)

    @property
    def capacity(self):
        return self.state.limit

    @property
    def resets(self):
        return self.state.resets

    def next(self, x):
        i = fmb_next(self.state, self.array, x)
        self.calls += 1
        return i


class RecursiveFillMostBlocks(OnlinePlacer):
    """Fill-Most-Blocks on the first half, then recurse on the empty cells."""

    name = "rfmb"

    def __init__(self, n, space, array=None, check_doubling=True):
        super().__init__(n, space, array)
        self.check_doubling = check_doubling
        self.levels: list[FmbState] = []
        self._view = self.array
        self._to_top: list | None = None  # level view index -> index in self.array
        if n:
            self.levels.append(FmbState(n, space, check_doubling))

    @property
    def resets(self):
        return [ev for state in self.levels for ev in state.resets]

    def _descend(self) -> None:
        state = self.levels[-1]
        m = state.n // 2
        if m == 0:
            raise ValueError("stream longer than the array")
        view = self._view.empty_view()
        top = self._to_top
        self._to_top = list(view.index_map) if top is None else [top[j] for j in view.index_map]
        self._view = view
        self.levels.append(FmbState(m, self.space, self.check_doubling))

    def next(self, x):
        if not self.levels:
            raise ValueError("stream longer than the array")
        if self.levels[-1].done:
            self._descend()
        i = fmb_next(self.levels[-1], self._view, x)
        self.calls += 1
        return i if self._to_top is None else self._to_top[i]


class Leftmost(OnlinePlacer):
    """Naive comparator: every point goes to the left-most empty cell."""

    name = "leftmost"

    def __init__(self, n, space, array=None):
        super().__init__(n, space, array)
        self._next = 0

    def next(self, x):
        A = self.array
        i = self._next
        while i < self.n and not A.is_empty(i):
            i += 1
        if i >= self.n:
            raise ValueError("stream longer than the array")
        A.place(i, x)
        self._next = i + 1
        self.calls += 1
        return i


PLACERS = {cls.name: cls for cls in (RecursiveFillMostBlocks, FillMostBlocks, Leftmost)}


def make_placer(name: str, n: int, space: MetricSpace, array=None) -> OnlinePlacer:
    try:
        cls = PLACERS[name]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(PLACERS)}") from None
    return cls(n, space, array)


def fill_most_blocks(n: int, A, X, space: MetricSpace) -> FmbState:
    placer = FillMostBlocks(n, space, A)
    placer.run(X)
    return placer.state


def recursively_fill_most_blocks(n: int, A, X, space: MetricSpace) -> RecursiveFillMostBlocks:
    return RecursiveFillMostBlocks(n, space, A).run(X)


def leftmost_baseline(n: int, A, X, space: MetricSpace) -> Leftmost:
    return Leftmost(n, space, A).run(X)


def fmb_constant(n: int) -> float:
    """``N2 + 4n/N1 + 2 N2`` divided by ``sqrt(n)``; at most 11 for every n >= 1."""
    n1 = math.isqrt(n)
    n2 = 2 * n1
    return (n2 + 4 * n / n1 + 2 * n2) / math.sqrt(n)
