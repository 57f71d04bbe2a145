"""Metric spaces, point tables and the distance oracle.

Three kinds of space are supported:

* ``euclidean`` -- points are coordinate vectors of a fixed dimension.
* ``uniform``   -- points are opaque labels; distinct labels are at distance 1.
  Labels may optionally carry a *spoke* length, in which case the distance
  between distinct labels ``a`` and ``b`` is ``spoke(a) + spoke(b)`` (a star
  metric).  With every spoke equal to 0.5 this is exactly the uniform metric.
* ``matrix``    -- points index rows of an explicit distance matrix.

Every entry of the point table gets its own ``PointId`` (a plain int); repeated
input points are distinct ids whose data compare equal.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

REL_TOL = 1e-9
DEFAULT_SPOKE = 0.5
MEMO_LIMIT = 1 << 20

KINDS = ("euclidean", "uniform", "matrix")


class MetricError(ValueError):
    """Raised when a space description is inconsistent or not a metric."""


@dataclass(frozen=True)
class Violation:
    axiom: str
    witness: tuple
    detail: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def axioms(self) -> set:
        return {v.axiom for v in self.violations}


def validate_matrix_metric(matrix, rtol: float = REL_TOL) -> ValidationReport:
    """Check the metric axioms on a square matrix.

    Every violated axiom is reported with its witnessing index pair or triple.
    Triangle violations are reported once per unordered endpoint pair
    ``(i, j)`` and intermediate ``k`` as the triple ``(i, k, j)``.
    """
    report = ValidationReport()
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        report.violations.append(Violation("square", tuple(m.shape), "matrix is not square"))
        return report
    k = m.shape[0]
    for i in range(k):
        if m[i, i] != 0:
            report.violations.append(Violation("zero-diagonal", (i,), f"d({i},{i})={m[i, i]}"))
    for i, j in zip(*np.nonzero(m < 0)):
        report.violations.append(Violation("nonnegativity", (int(i), int(j)), f"d({i},{j})={m[i, j]}"))
    for i, j in zip(*np.nonzero(np.triu(m != m.T, 1))):
        report.violations.append(
            Violation("symmetry", (int(i), int(j)), f"d({i},{j})={m[i, j]} != d({j},{i})={m[j, i]}")
        )
    for mid in range(k):
        via = m[:, mid][:, None] + m[mid, :][None, :]
        bad = m - via > rtol * np.maximum(np.abs(m), np.abs(via))
        bad = np.triu(bad, 1)
        bad[mid, :] = False
        bad[:, mid] = False
        for i, j in zip(*np.nonzero(bad)):
            report.violations.append(
                Violation(
                    "triangle",
                    (int(i), mid, int(j)),
                    f"d({i},{j})={m[i, j]} > d({i},{mid})+d({mid},{j})={via[i, j]}",
                )
            )
    return report


class MetricSpace:
    """An immutable point table with a (memoizing) distance oracle.

    Build instances with :func:`euclidean_space`, :func:`uniform_space`,
    :func:`matrix_space` or :func:`build_space`.
    """

    def __init__(self, kind: str, size: int, *, dim: int | None = None, memoize: bool = True):
        self.kind = kind
        self.dim = dim
        self._size = size
        self.memoize = memoize
        self._memo: dict[int, float] = {}
        self.tolerant = kind == "euclidean"

    def __len__(self) -> int:
        return self._size

    def __repr__(self) -> str:
        extra = f", dim={self.dim}" if self.dim is not None else ""
        return f"MetricSpace(kind={self.kind!r}, points={len(self)}{extra})"

    def _check(self, p: int) -> None:
        if not 0 <= p < self._size:
            raise KeyError(f"unknown PointId {p}")

    def distance(self, p: int, q: int) -> float:
        self._check(p)
        self._check(q)
        if p == q:
            return 0.0
        if not self.memoize:
            return self._raw(p, q)
        if p > q:
            p, q = q, p
        key = q * (q + 1) // 2 + p
        d = self._memo.get(key)
        if d is None:
            d = self._raw(p, q)
            if len(self._memo) < MEMO_LIMIT:
                self._memo[key] = d
        return d

    def within(self, d: float, r: float) -> bool:
        """``d <= r``, relaxed by the relative tolerance on Euclidean spaces."""
        if self.tolerant:
            return d <= r + REL_TOL * r
        return d <= r

    def threshold(self, r: float) -> float:
        return r + REL_TOL * r if self.tolerant else r

    def first_within(self, x: int, centers: Sequence[int], r: float) -> int | None:
        """Position of the first center (in list order) within ``r`` of ``x``."""
        if not centers:
            return None
        thr = self.threshold(r)
        if len(centers) <= 16:
            dist = self.distance
            for pos, c in enumerate(centers):
                if dist(x, c) <= thr:
                    return pos
            return None
        hits = np.flatnonzero(self.distances_from(x, centers) <= thr)
        return int(hits[0]) if hits.size else None

    def pair_distances(self, a, b) -> np.ndarray:
        """Elementwise ``d(a[i], b[i])``; bit-identical to :meth:`distance`."""
        raise NotImplementedError

    def distances_from(self, p: int, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        return self.pair_distances(np.full(ids.shape, p, dtype=np.int64), ids)

    def distinct(self, ids: Iterable[int]) -> np.ndarray:
        """Sorted representatives (minimum id) of the distance-0 classes in ``ids``."""
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def _raw(self, p: int, q: int) -> float:
        raise NotImplementedError


class EuclideanSpace(MetricSpace):
    def __init__(self, coords, memoize: bool = True):
        coords = np.ascontiguousarray(coords, dtype=float)
        if coords.ndim != 2:
            raise MetricError("euclidean coordinates must form a 2-D table")
        if not np.all(np.isfinite(coords)):
            raise MetricError("euclidean coordinates must be finite")
        coords = coords + 0.0  # -0.0 -> 0.0 so equal points dedupe bitwise
        super().__init__("euclidean", coords.shape[0], dim=coords.shape[1], memoize=memoize)
        self.coords = coords
        self.coords.setflags(write=False)
        self._rows = [tuple(r) for r in coords.tolist()]

    def _raw(self, p, q):
        # Sequential sum of squares, same order numpy uses for short rows.
        s = 0.0
        for a, b in zip(self._rows[p], self._rows[q]):
            t = a - b
            s += t * t
        return math.sqrt(s)

    def pair_distances(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        diff = self.coords[a] - self.coords[b]
        return np.sqrt(np.square(diff).sum(axis=-1))

    def distinct(self, ids):
        ids = np.unique(np.asarray(list(ids) if not isinstance(ids, np.ndarray) else ids, dtype=np.int64))
        if ids.size <= 1:
            return ids
        _, first = np.unique(self.coords[ids], axis=0, return_index=True)
        return np.sort(ids[first])

    def to_json(self):
        return {"kind": "euclidean", "dim": self.dim, "points": self.coords.tolist()}


class UniformSpace(MetricSpace):
    def __init__(self, labels, spokes=None, memoize: bool = True):
        if isinstance(labels, np.ndarray) and labels.dtype.kind in "iu":
            uniq, label_codes = np.unique(labels, return_inverse=True)
            label_codes = label_codes.astype(np.int64).reshape(-1)
            tokens = uniq.tolist()
        else:
            codes: dict[Any, int] = {}
            label_codes = np.fromiter(
                (codes.setdefault(t, len(codes)) for t in labels), dtype=np.int64
            )
            tokens = list(codes)
        super().__init__("uniform", label_codes.shape[0], memoize=memoize)
        self.tokens = tokens
        self.labels = label_codes
        n = label_codes.shape[0]
        if spokes is None:
            spoke_arr = np.full(n, DEFAULT_SPOKE)
        else:
            spoke_arr = np.asarray(spokes, dtype=float)
            if spoke_arr.shape != (n,):
                raise MetricError("one spoke length per point is required")
            if np.any(spoke_arr <= 0) or not np.all(np.isfinite(spoke_arr)):
                raise MetricError("spoke lengths must be positive and finite")
            per_label = np.full(len(tokens), np.nan)
            per_label[label_codes] = spoke_arr
            if not np.array_equal(per_label[label_codes], spoke_arr):
                raise MetricError("points sharing a label must share a spoke length")
        self.spokes = spoke_arr
        self.labels.setflags(write=False)
        self.spokes.setflags(write=False)
        self._lab = label_codes.tolist()
        self._sp = spoke_arr.tolist()

    @property
    def is_plain(self) -> bool:
        """True when all distinct-point distances are exactly 1."""
        return bool(np.all(self.spokes == DEFAULT_SPOKE))

    def _raw(self, p, q):
        if self._lab[p] == self._lab[q]:
            return 0.0
        return self._sp[p] + self._sp[q]

    def distance(self, p, q):
        # A table lookup already; the memo would only cost time here.
        self._check(p)
        self._check(q)
        return self._raw(p, q)

    def first_within(self, x, centers, r):
        lab, sp = self._lab, self._sp
        lx, sx = lab[x], sp[x]
        for pos, c in enumerate(centers):
            d = 0.0 if lab[c] == lx else sp[c] + sx
            if d <= r:
                return pos
        return None

    def pair_distances(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        same = self.labels[a] == self.labels[b]
        return np.where(same, 0.0, self.spokes[a] + self.spokes[b])

    def distinct(self, ids):
        ids = np.unique(np.asarray(list(ids) if not isinstance(ids, np.ndarray) else ids, dtype=np.int64))
        if ids.size <= 1:
            return ids
        _, first = np.unique(self.labels[ids], return_index=True)
        return np.sort(ids[first])

    def to_json(self):
        out = {"kind": "uniform", "points": [self.tokens[c] for c in self._lab]}
        if not self.is_plain:
            out["spokes"] = self._sp
        return out


class MatrixSpace(MetricSpace):
    def __init__(self, matrix, rows=None, validate: bool = False, memoize: bool = True):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise MetricError(f"distance matrix must be square, got shape {m.shape}")
        if np.any(np.diag(m) != 0):
            raise MetricError("distance matrix has a nonzero diagonal")
        if np.any(m < 0):
            raise MetricError("distance matrix has a negative entry")
        if not np.array_equal(m, m.T):
            raise MetricError("distance matrix is not symmetric")
        if validate:
            report = validate_matrix_metric(m)
            if not report.ok:
                first = report.violations[0]
                raise MetricError(f"{len(report.violations)} metric violations, e.g. {first.axiom} {first.witness}: {first.detail}")
        rows = np.arange(m.shape[0]) if rows is None else np.asarray(rows, dtype=np.int64)
        if rows.size and (rows.min() < 0 or rows.max() >= m.shape[0]):
            raise MetricError("point row index outside the matrix")
        super().__init__("matrix", rows.shape[0], memoize=memoize)
        self.matrix = m
        self.rows = rows
        self.matrix.setflags(write=False)
        self.rows.setflags(write=False)
        self._m = m.tolist()
        self._r = rows.tolist()
        # rows at distance 0 from each other collapse to the smallest such row
        cls = np.arange(m.shape[0])
        for i in range(m.shape[0]):
            zero = np.flatnonzero(m[i] == 0)
            cls[i] = zero.min()
        self._row_class = cls

    def _raw(self, p, q):
        return self._m[self._r[p]][self._r[q]]

    def distance(self, p, q):
        self._check(p)
        self._check(q)
        return self._raw(p, q)

    def pair_distances(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        return self.matrix[self.rows[a], self.rows[b]]

    def distinct(self, ids):
        ids = np.unique(np.asarray(list(ids) if not isinstance(ids, np.ndarray) else ids, dtype=np.int64))
        if ids.size <= 1:
            return ids
        _, first = np.unique(self._row_class[self.rows[ids]], return_index=True)
        return np.sort(ids[first])

    def to_json(self):
        out = {"kind": "matrix", "matrix": self.matrix.tolist()}
        if not np.array_equal(self.rows, np.arange(self.matrix.shape[0])):
            out["points"] = self._r
        return out


def euclidean_space(coords, memoize: bool = True) -> EuclideanSpace:
    return EuclideanSpace(coords, memoize=memoize)


def uniform_space(labels, spokes=None, memoize: bool = True) -> UniformSpace:
    return UniformSpace(labels, spokes, memoize=memoize)


def matrix_space(matrix, rows=None, validate: bool = False, memoize: bool = True) -> MatrixSpace:
    return MatrixSpace(matrix, rows, validate=validate, memoize=memoize)


def build_space(spec: dict, validate: bool = False, memoize: bool = True) -> MetricSpace:
    """Build a space from the JSON instance layout (see :func:`load_instance`)."""
    kind = spec.get("kind")
    if kind not in KINDS:
        raise MetricError(f"unknown metric kind {kind!r}; expected one of {KINDS}")
    if kind == "euclidean":
        points = spec.get("points", [])
        dim = spec.get("dim")
        if dim is None:
            dim = len(points[0]) if points else 0
        for i, p in enumerate(points):
            if len(p) != dim:
                raise MetricError(f"point {i} has {len(p)} coordinates, expected dim={dim}")
        coords = np.asarray(points, dtype=float).reshape(len(points), dim)
        return EuclideanSpace(coords, memoize=memoize)
    if kind == "uniform":
        return UniformSpace(spec.get("points", []), spec.get("spokes"), memoize=memoize)
    if "matrix" not in spec:
        raise MetricError("matrix kind requires a 'matrix' entry")
    return MatrixSpace(spec["matrix"], spec.get("points"), validate=validate, memoize=memoize)


@dataclass
class Instance:
    """A space together with the order in which its points are streamed."""

    space: MetricSpace
    order: list
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.order)

    def to_json(self) -> dict:
        out = self.space.to_json()
        if list(self.order) != list(range(len(self.space))):
            out["stream"] = [int(i) for i in self.order]
        if self.meta:
            out["meta"] = self.meta
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def load_instance(source, validate: bool = False) -> Instance:
    """Load an instance from a dict, a JSON string or a path."""
    if isinstance(source, dict):
        spec = source
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            with open(text) as fh:
                text = fh.read()
        spec = json.loads(text)
    space = build_space(spec, validate=validate)
    order = spec.get("stream")
    if order is None:
        order = list(range(len(space)))
    else:
        order = [int(i) for i in order]
        bad = [i for i in order if not 0 <= i < len(space)]
        if bad:
            raise MetricError(f"stream references unknown PointIds {bad[:5]}")
    return Instance(space, order, dict(spec.get("meta", {})))
