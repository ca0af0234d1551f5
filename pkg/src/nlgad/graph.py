"""Attributed-graph data model and file I/O.

Graphs are undirected, unweighted, and stored in CSR form with ascending
neighbor lists. Instances are immutable after construction; anomaly
injection and similar transforms build new graphs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, GraphParseError

_BINARY_MAGIC = b"NLGG"
_BINARY_VERSION = 1


@dataclass(frozen=True)
class AttributedGraph:
    """Sparse symmetric adjacency plus dense node features.

    Attributes
    ----------
    n : int
        Node count.
    indptr, indices : int64 arrays
        CSR adjacency; ``indices[indptr[v]:indptr[v+1]]`` are the ascending,
        duplicate-free neighbors of ``v``. Symmetric, zero diagonal.
    features : float64 array of shape (n, d)
    labels : optional int8 array of shape (n,) with entries in {0, 1}
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "indptr", np.ascontiguousarray(self.indptr, dtype=np.int64))
        object.__setattr__(self, "indices", np.ascontiguousarray(self.indices, dtype=np.int64))
        object.__setattr__(self, "features", np.ascontiguousarray(self.features, dtype=np.float64))
        if self.labels is not None:
            object.__setattr__(self, "labels", np.ascontiguousarray(self.labels, dtype=np.int8))
        self._validate()

    def _validate(self):
        n = self.n
        if self.indptr.shape != (n + 1,):
            raise DataError(f"indptr has shape {self.indptr.shape}, expected ({n + 1},)")
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise DataError(f"features has shape {self.features.shape}, expected ({n}, d)")
        if self.features.shape[1] < 1:
            raise DataError("feature dimension must be >= 1")
        if self.indptr[0] != 0 or self.indptr[-1] != len(self.indices):
            raise DataError("indptr does not index the indices array")
        if np.any(np.diff(self.indptr) < 0):
            raise DataError("indptr must be non-decreasing")
        if len(self.indices) and (self.indices.min() < 0 or self.indices.max() >= n):
            raise DataError("neighbor index out of range")
        for v in range(n):
            nbrs = self.indices[self.indptr[v]:self.indptr[v + 1]]
            if np.any(np.diff(nbrs) <= 0):
                raise DataError(f"neighbor list of node {v} is not strictly ascending")
            if np.any(nbrs == v):
                raise DataError(f"self-loop on node {v}")
        # Symmetry: (u, v) sorted edge multiset must pair up exactly.
        rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(self.indptr))
        fwd = set(zip(rows.tolist(), self.indices.tolist()))
        for u, v in fwd:
            if (v, u) not in fwd:
                raise DataError(f"adjacency not symmetric: ({u}, {v}) present without reverse")
        if self.labels is not None:
            if self.labels.shape != (n,):
                raise DataError(f"labels has shape {self.labels.shape}, expected ({n},)")
            if not np.all((self.labels == 0) | (self.labels == 1)):
                raise DataError("labels must be 0 or 1")

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        """Number of undirected edges m."""
        return len(self.indices) // 2

    def degree(self, v: int) -> int:
        self._check_node(v)
        return int(self.indptr[v + 1] - self.indptr[v])

    def neighbors(self, v: int) -> np.ndarray:
        """Ascending, duplicate-free neighbor indices of v."""
        self._check_node(v)
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def _check_node(self, v: int):
        if not 0 <= v < self.n:
            raise DataError(f"node index {v} out of range [0, {self.n})")

    def with_features(self, features: np.ndarray) -> "AttributedGraph":
        return AttributedGraph(self.n, self.indptr, self.indices, features, self.labels)

    def with_labels(self, labels: np.ndarray | None) -> "AttributedGraph":
        return AttributedGraph(self.n, self.indptr, self.indices, self.features, labels)


def from_edges(n: int, edges, features: np.ndarray,
               labels: np.ndarray | None = None) -> AttributedGraph:
    """Build a graph from an iterable of (u, v) pairs.

    Edges are symmetrized and deduplicated; self-loops are rejected.
    """
    pairs = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise DataError(f"self-loop on node {u} is not allowed")
        if not (0 <= u < n and 0 <= v < n):
            raise DataError(f"edge ({u}, {v}) references a node outside [0, {n})")
        pairs.add((u, v))
        pairs.add((v, u))
    if pairs:
        arr = np.array(sorted(pairs), dtype=np.int64)
        rows, cols = arr[:, 0], arr[:, 1]
    else:
        rows = cols = np.empty(0, dtype=np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)
    return AttributedGraph(n, indptr, cols, features, labels)


def _parse_lines(path):
    try:
        f = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}")
    with f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def load_graph(edge_path, feature_path, label_path=None) -> AttributedGraph:
    """Load a graph from whitespace-separated text files.

    The node count is the row count of the feature file; edges referencing
    nodes beyond it are rejected.
    """
    feat_rows = []
    d = None
    for lineno, line in _parse_lines(feature_path):
        try:
            row = [float(tok) for tok in line.split()]
        except ValueError:
            raise GraphParseError("feature value is not a decimal real",
                                  path=feature_path, line=lineno)
        if d is None:
            d = len(row)
        elif len(row) != d:
            raise GraphParseError(f"expected {d} feature values, got {len(row)}",
                                  path=feature_path, line=lineno)
        feat_rows.append(row)
    if not feat_rows:
        raise GraphParseError("feature file is empty", path=feature_path)
    features = np.array(feat_rows, dtype=np.float64)
    n = features.shape[0]

    edges = []
    for lineno, line in _parse_lines(edge_path):
        toks = line.split()
        if len(toks) != 2:
            raise GraphParseError(f"expected two node ids, got {len(toks)} tokens",
                                  path=edge_path, line=lineno)
        try:
            u, v = int(toks[0]), int(toks[1])
        except ValueError:
            raise GraphParseError("node id is not an integer", path=edge_path, line=lineno)
        if u == v:
            raise GraphParseError(f"self-loop on node {u} is not allowed",
                                  path=edge_path, line=lineno)
        if not (0 <= u < n and 0 <= v < n):
            raise GraphParseError(f"node index {max(u, v)} out of range [0, {n})",
                                  path=edge_path, line=lineno)
        edges.append((u, v))

    labels = None
    if label_path is not None:
        vals = []
        for lineno, line in _parse_lines(label_path):
            if line not in ("0", "1"):
                raise GraphParseError(f"label must be 0 or 1, got {line!r}",
                                      path=label_path, line=lineno)
            vals.append(int(line))
        if len(vals) != n:
            raise GraphParseError(f"label file has {len(vals)} entries, expected {n}",
                                  path=label_path)
        labels = np.array(vals, dtype=np.int8)

    return from_edges(n, edges, features, labels)


def save_graph_text(graph: AttributedGraph, edge_path, feature_path, label_path=None):
    """Write a graph back out in the text formats accepted by load_graph."""
    with open(edge_path, "w", encoding="utf-8") as f:
        for v in range(graph.n):
            for u in graph.neighbors(v):
                if v < u:
                    f.write(f"{v} {u}\n")
    with open(feature_path, "w", encoding="utf-8") as f:
        for row in graph.features:
            f.write(" ".join(repr(float(x)) for x in row) + "\n")
    if label_path is not None:
        if graph.labels is None:
            raise DataError("graph has no labels to save")
        with open(label_path, "w", encoding="utf-8") as f:
            for y in graph.labels:
                f.write(f"{int(y)}\n")


def save_graph_binary(graph: AttributedGraph, path):
    """Write the little-endian binary round-trip format (see docs/formats.md)."""
    flags = 1 if graph.labels is not None else 0
    with open(path, "wb") as f:
        f.write(_BINARY_MAGIC)
        f.write(struct.pack("<II", _BINARY_VERSION, flags))
        f.write(struct.pack("<QQQ", graph.n, graph.d, len(graph.indices)))
        f.write(graph.indptr.astype("<i8").tobytes())
        f.write(graph.indices.astype("<i8").tobytes())
        f.write(graph.features.astype("<f8").tobytes())
        if graph.labels is not None:
            f.write(graph.labels.astype("<i1").tobytes())


def load_graph_binary(path) -> AttributedGraph:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}")
    if data[:4] != _BINARY_MAGIC:
        raise DataError(f"{path}: not a graph binary file (bad magic)")
    version, flags = struct.unpack_from("<II", data, 4)
    if version != _BINARY_VERSION:
        raise DataError(f"{path}: unsupported graph binary version {version}")
    n, d, nnz = struct.unpack_from("<QQQ", data, 12)
    off = 36
    indptr = np.frombuffer(data, dtype="<i8", count=n + 1, offset=off).copy()
    off += (n + 1) * 8
    indices = np.frombuffer(data, dtype="<i8", count=nnz, offset=off).copy()
    off += nnz * 8
    features = np.frombuffer(data, dtype="<f8", count=n * d, offset=off).copy().reshape(n, d)
    off += n * d * 8
    labels = None
    if flags & 1:
        labels = np.frombuffer(data, dtype="<i1", count=n, offset=off).copy()
    return AttributedGraph(int(n), indptr, indices, features, labels)
