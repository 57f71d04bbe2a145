"""Online r-nets: covering/packing center sets maintained by insertion."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metric import REL_TOL, MetricSpace
from .oracles import mst_weight


@dataclass
class Net:
    radius: float = 0.0
    centers: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.centers)

    def find_center(self, x: int, space: MetricSpace) -> int | None:
        """First center in insertion order covering ``x``, or None."""
        pos = space.first_within(x, self.centers, self.radius)
        return None if pos is None else self.centers[pos]

    def snapshot(self) -> "Net":
        return Net(self.radius, list(self.centers))


def increase_net(net: Net, x: int, space: MetricSpace) -> bool:
    """Add ``x`` as a center unless some center is within the radius."""
    if space.first_within(x, net.centers, net.radius) is not None:
        return False
    net.centers.append(x)
    return True


def verify_net(net: Net, X, space: MetricSpace) -> bool:
    """True iff ``net`` covers every point of ``X`` and its centers pack."""
    r = net.radius
    centers = list(net.centers)
    X = list(X)
    if len(centers) <= 16:
        for i, c in enumerate(centers):
            for c2 in centers[i + 1:]:
                if space.distance(c, c2) <= r:
                    return False
        return all(space.first_within(x, centers, r) is not None for x in X)
    for i, c in enumerate(centers[:-1]):
        if np.any(space.distances_from(c, centers[i + 1:]) <= r):
            return False
    if not X:
        return True
    thr = space.threshold(r)
    covered = np.zeros(len(X), dtype=bool)
    for c in centers:
        covered |= space.distances_from(c, X) <= thr
    return bool(covered.all())


def net_size_slack(net: Net, X, space: MetricSpace) -> float:
    """``2 MST(X) - (|C| - 1) r`` for a verified r-net ``C`` of ``X``.

    Nonnegative up to rounding for every valid net; raises ValueError when the
    net does not verify against ``X``.
    """
    X = list(X)
    if not X or not verify_net(net, X, space):
        raise ValueError("net is not a verified r-net of the given points")
    return 2 * mst_weight(space, X) - (len(net.centers) - 1) * net.radius


def slack_ok(slack: float, mst: float) -> bool:
    return slack >= -REL_TOL * 2 * mst
