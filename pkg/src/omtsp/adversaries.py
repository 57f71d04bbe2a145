"""Input generators: the oblivious random adversary, comb configurations and
seeded random workloads.

Randomness always comes from ``numpy.random.Generator(PCG64(seed))``; the
adversary draws one ``random()`` double per epoch, in epoch order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .metric import REL_TOL, EuclideanSpace, Instance, MetricSpace, UniformSpace
from .oracles import opt_bounds


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def trial_seed(master: int, index: int) -> int:
    """Independent per-trial seed derived from ``(master, index)`` via SeedSequence."""
    return int(np.random.SeedSequence([master, index]).generate_state(1, dtype=np.uint64)[0])


def ceil_root_power(n: int, num: int, den: int) -> int:
    """Smallest integer ``u`` with ``u**den >= n**num``, i.e. ``ceil(n**(num/den))``."""
    target = n**num
    u = max(0, int(round(n ** (num / den))) - 2)
    while u**den < target:
        u += 1
    return u


@dataclass(frozen=True)
class AdversaryPlan:
    n: int
    u_size: int  # |U| = ceil(n^(4/5))
    far_distance: int  # d(x, u) for every u in U
    probability: float  # per-epoch chance of switching to x, n^(-3/5)
    epochs: int  # coin flips available: ceil(n / |U|)
    x_start: int | None  # stream position of the first copy of x, None if absent

    @property
    def x_served(self) -> bool:
        return self.x_start is not None


def adversary_plan(n: int, seed: int) -> AdversaryPlan:
    """Draw the adversary's coin flips for ``(n, seed)``."""
    if n < 1:
        raise ValueError("adversary needs n >= 1")
    u_size = ceil_root_power(n, 4, 5)
    p = n ** (-3 / 5)
    epochs = -(-n // u_size)
    rng = rng_for(seed)
    x_start = None
    for e in range(epochs):
        if rng.random() < p:
            x_start = e * u_size
            break
    return AdversaryPlan(n, u_size, u_size, p, epochs, x_start)


def oblivious_random_adversary(n: int, seed: int) -> Instance:
    """Epochs of ``U`` (served in label order) until a coin flip switches to ``x``.

    The last epoch is truncated so the stream has exactly ``n`` points.  The
    space is a uniform (star) metric: U-points are 1 apart, ``x`` is
    ``|U|`` away from each of them.
    """
    plan = adversary_plan(n, seed)
    u = plan.u_size
    labels = np.arange(n, dtype=np.int64) % u
    spokes = np.full(n, 0.5)
    if plan.x_served:
        labels[plan.x_start:] = u
        spokes[plan.x_start:] = u - 0.5
    space = UniformSpace(labels, spokes)
    meta = {
        "generator": "adversary",
        "n": n,
        "seed": seed,
        "u_size": u,
        "far_distance": plan.far_distance,
        "probability": plan.probability,
        "epochs": plan.epochs,
        "x_served": plan.x_served,
        "x_start": plan.x_start,
    }
    return Instance(space, list(range(n)), meta)


def far_point_probability(n: int) -> float:
    """Chance that the adversary serves ``x``: ``1 - (1 - n^(-3/5))^epochs``."""
    if n < 1:
        raise ValueError("n must be positive")
    u_size = ceil_root_power(n, 4, 5)
    epochs = -(-n // u_size)
    p = n ** (-3 / 5)
    return 1.0 - (1.0 - p) ** epochs


@dataclass
class CombInstance:
    """Two endpoints ``a0``, ``a1`` and ``m`` evenly spaced points between them."""

    a0: int
    a1: int
    X: list
    ell: float
    space: MetricSpace
    positions: dict = field(default_factory=dict)  # PointId -> Fraction, when exact

    @property
    def m(self) -> int:
        return len(self.X)


def comb_instance(m: int) -> CombInstance:
    """Unit interval with ``a0 = 0``, ``a1 = 1`` and ``X = {i/m : 0 <= i < m}``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    positions = [Fraction(0), Fraction(1)] + [Fraction(i, m) for i in range(m)]
    space = EuclideanSpace(np.array([[float(q)] for q in positions]))
    ids = list(range(len(positions)))
    return CombInstance(0, 1, ids[2:], 1.0, space, dict(zip(ids, positions)))


def validate_comb(inst: CombInstance, space: MetricSpace | None = None, want_exact: bool = True) -> bool:
    """Check both comb conditions against ``ell``.

    ``ell`` is re-derived with :func:`opt_bounds`.  With rational positions the
    conditions are checked exactly against the declared ``ell`` (which must
    agree with the oracle); otherwise in floating point against the exact
    optimum, or the upper bound when the point set is too large for it.
    """
    space = space or inst.space
    m = inst.m
    if m < 1:
        return False
    ids = [inst.a0, inst.a1, *inst.X]
    bounds = opt_bounds(space, ids, want_exact=want_exact)
    tol = REL_TOL * max(bounds.upper, inst.ell)
    if bounds.exact is not None:
        if abs(bounds.exact - inst.ell) > tol:
            return False
    elif not bounds.lower - tol <= inst.ell <= bounds.upper + tol:
        return False

    pos = inst.positions
    if pos and all(i in pos for i in ids):
        ell = Fraction(inst.ell)

        def dist(a, b):
            return abs(pos[a] - pos[b])

        zero = 0
    else:
        ell = bounds.exact if bounds.exact is not None else bounds.upper
        dist = space.distance
        zero = tol
    X = inst.X
    for i, x in enumerate(X):
        for y in X[i + 1:]:
            if dist(x, y) < ell / m - zero:
                return False
        if dist(inst.a0, x) + dist(x, inst.a1) < ell - zero:
            return False
    return True


def comb_stream(n: int, seed: int) -> Instance:
    """``a0``, ``a1``, then seeded draws from a comb with ``m = max(1, isqrt(n))`` teeth."""
    if n < 1:
        raise ValueError("n must be positive")
    m = max(1, math.isqrt(n))
    rng = rng_for(seed)
    teeth = np.arange(m) / m
    coords = np.empty(n)
    coords[: min(n, 2)] = [0.0, 1.0][: min(n, 2)]
    if n > 2:
        coords[2:] = teeth[rng.integers(0, m, n - 2)]
    meta = {"generator": "comb", "n": n, "seed": seed, "m": m}
    return Instance(EuclideanSpace(coords[:, None]), list(range(n)), meta)


def random_stream(kind: str, n: int, seed: int, dim: int = 2, k: int = 8) -> Instance:
    """Seeded i.i.d. points: unit cube for ``euclidean``, ``k`` labels for ``uniform``."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = rng_for(seed)
    if kind == "euclidean":
        if dim < 1:
            raise ValueError("dim must be positive")
        space = EuclideanSpace(rng.random((n, dim)))
        meta = {"generator": "euclidean", "n": n, "seed": seed, "dim": dim}
    elif kind == "uniform":
        if k < 1:
            raise ValueError("k must be positive")
        space = UniformSpace(rng.integers(0, k, n))
        meta = {"generator": "uniform", "n": n, "seed": seed, "k": k}
    else:
        raise ValueError(f"unknown random stream kind {kind!r}")
    return Instance(space, list(range(n)), meta)
