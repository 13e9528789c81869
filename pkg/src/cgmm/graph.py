"""Labeled graph containers, the line-based dataset format and neighborhood indexing.

Vertex indices are 0-based within a graph. Vertex labels live in ``1..M`` and
arc labels in ``1..A``; label 0 is never valid. The neighborhood of a vertex
is defined by its *incoming* arcs.

Dataset text format::

    # comment
    dataset <name> <M> <A>
    graph <id> <target|->
    v <vertex_index> <label>
    e <src> <dst> <arc_label> <d|u>
    end
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, TextIO

import numpy as np

from .errors import DataError

__all__ = [
    "Graph",
    "GraphDataset",
    "NeighborIndex",
    "PackedDataset",
    "build_neighbor_index",
    "parse_dataset",
    "read_dataset",
    "serialize_dataset",
    "validate_dataset",
    "write_dataset",
]


def _frozen(values, dtype=np.int64) -> np.ndarray:
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Graph:
    """A graph with discrete vertex labels and labeled directed arcs.

    Undirected edges are stored as two opposite arcs sharing one label.
    Self-loops and duplicate arcs are allowed; duplicates count with
    multiplicity everywhere.
    """

    id: str
    labels: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    arc_labels: np.ndarray
    target: int | None = None

    def __post_init__(self):
        for name in ("labels", "src", "dst", "arc_labels"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if not (len(self.src) == len(self.dst) == len(self.arc_labels)):
            raise DataError(f"graph {self.id}: arc arrays have different lengths")

    @classmethod
    def from_arcs(cls, id, labels, arcs=(), target=None) -> "Graph":
        """Build from a label sequence and ``(src, dst, arc_label)`` triples."""
        arcs = list(arcs)
        if arcs:
            src, dst, lab = zip(*arcs)
        else:
            src = dst = lab = ()
        return cls(str(id), labels, src, dst, lab, target)

    @property
    def n_vertices(self) -> int:
        return len(self.labels)

    @property
    def n_arcs(self) -> int:
        return len(self.src)

    def arcs(self) -> list[tuple[int, int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist(), self.arc_labels.tolist()))

    def permuted(self, perm) -> "Graph":
        """Relabel vertex ``u`` as ``perm[u]``; the arc list is kept in order."""
        perm = np.asarray(perm, dtype=np.int64)
        labels = np.empty_like(self.labels)
        labels[perm] = self.labels
        return Graph(self.id, labels, perm[self.src], perm[self.dst], self.arc_labels, self.target)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.id == other.id
            and self.target == other.target
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.arc_labels, other.arc_labels)
        )

    __hash__ = None


@dataclass(frozen=True)
class PackedDataset:
    """All graphs of a dataset concatenated into flat global-index arrays."""

    labels: np.ndarray       # (N,) vertex labels, 1-based
    vertex_ptr: np.ndarray   # (G+1,) graph g owns vertices vertex_ptr[g]:vertex_ptr[g+1]
    vertex_graph: np.ndarray  # (N,) owning graph of every vertex
    src: np.ndarray          # (E,) global source vertex
    dst: np.ndarray          # (E,) global destination vertex
    arc_labels: np.ndarray   # (E,) 1-based
    arc_ptr: np.ndarray      # (G+1,)

    @property
    def n_vertices(self) -> int:
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class GraphDataset:
    graphs: tuple
    M: int
    A: int
    name: str = "dataset"

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        if self.M < 1 or self.A < 1:
            raise DataError(f"alphabet sizes must be >= 1 (got M={self.M}, A={self.A})")

    def __len__(self):
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def __getitem__(self, i):
        return self.graphs[i]

    def __eq__(self, other):
        if not isinstance(other, GraphDataset):
            return NotImplemented
        return (self.name, self.M, self.A) == (other.name, other.M, other.A) and self.graphs == other.graphs

    __hash__ = None

    @property
    def targets(self) -> np.ndarray:
        if any(g.target is None for g in self.graphs):
            raise DataError(f"dataset {self.name!r} contains unlabeled graphs")
        return np.array([g.target for g in self.graphs], dtype=np.int64)

    @property
    def is_labeled(self) -> bool:
        return all(g.target is not None for g in self.graphs)

    def subset(self, indices: Iterable[int]) -> "GraphDataset":
        return GraphDataset([self.graphs[i] for i in indices], self.M, self.A, self.name)

    @cached_property
    def packed(self) -> PackedDataset:
        nv = np.array([g.n_vertices for g in self.graphs], dtype=np.int64)
        ne = np.array([g.n_arcs for g in self.graphs], dtype=np.int64)
        vptr = np.concatenate([[0], np.cumsum(nv)])
        aptr = np.concatenate([[0], np.cumsum(ne)])
        arc_offset = np.repeat(vptr[:-1], ne)

        def cat(name):
            parts = [getattr(g, name) for g in self.graphs]
            return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

        return PackedDataset(
            labels=cat("labels"),
            vertex_ptr=vptr,
            vertex_graph=np.repeat(np.arange(len(self.graphs)), nv),
            src=cat("src") + arc_offset,
            dst=cat("dst") + arc_offset,
            arc_labels=cat("arc_labels"),
            arc_ptr=aptr,
        )


class NeighborIndex:
    """Per-vertex, per-arc-label multisets of incoming-arc sources.

    ``index.neighbors(u, a)`` lists every ``v`` with an arc ``v -> u`` labeled
    ``a``, in ascending order and with multiplicity.
    """

    def __init__(self, graph: Graph, A: int):
        self.n_vertices = graph.n_vertices
        self.A = A
        key = graph.dst * A + (graph.arc_labels - 1)
        order = np.lexsort((graph.src, key))
        self._sources = graph.src[order]
        counts = np.bincount(key, minlength=self.n_vertices * A)
        self._ptr = np.concatenate([[0], np.cumsum(counts)])

    def neighbors(self, u: int, a: int) -> np.ndarray:
        k = u * self.A + (a - 1)
        return self._sources[self._ptr[k]:self._ptr[k + 1]]

    def all_neighbors(self, u: int) -> np.ndarray:
        return np.sort(self._sources[self._ptr[u * self.A]:self._ptr[(u + 1) * self.A]])

    def in_degree(self, u: int) -> int:
        return int(self._ptr[(u + 1) * self.A] - self._ptr[u * self.A])

    def size(self) -> int:
        return int(self._ptr[-1])


def build_neighbor_index(graph: Graph, A: int | None = None) -> NeighborIndex:
    if A is None:
        A = int(graph.arc_labels.max()) if graph.n_arcs else 1
    return NeighborIndex(graph, A)


def validate_dataset(dataset: GraphDataset) -> list[str]:
    """Return one human-readable message per violated invariant."""
    problems = []
    for g in dataset.graphs:
        n = g.n_vertices
        bad = np.flatnonzero((g.labels < 1) | (g.labels > dataset.M))
        for u in bad:
            problems.append(f"graph {g.id}: vertex {u} label {g.labels[u]} outside 1..{dataset.M}")
        for k, (s, d, a) in enumerate(g.arcs()):
            if not (0 <= s < n and 0 <= d < n):
                problems.append(f"graph {g.id}: arc {k} ({s}->{d}) endpoint out of range 0..{n - 1}")
            if not 1 <= a <= dataset.A:
                problems.append(f"graph {g.id}: arc {k} ({s}->{d}) label {a} outside 1..{dataset.A}")
        if g.target is not None and g.target < 0:
            problems.append(f"graph {g.id}: negative target {g.target}")
    return problems


def _ints(tokens, lineno, what):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise DataError(f"line {lineno}: non-integer field in {what} record") from None


def parse_dataset(source: TextIO | str) -> GraphDataset:
    """Parse the dataset text format from a stream or a string."""
    if isinstance(source, str):
        source = io.StringIO(source)

    header = None
    graphs = []
    current = None  # (id, target, labels dict, arcs list, start line)

    def finish(lineno):
        gid, target, labels, arcs, start = current
        n = len(labels)
        if sorted(labels) != list(range(n)):
            raise DataError(f"line {start}: graph {gid} vertex indices are not 0..{n - 1}")
        graphs.append(Graph.from_arcs(gid, [labels[i] for i in range(n)], arcs, target))

    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        kind = tok[0]
        if kind == "dataset":
            if header is not None or len(tok) != 4:
                raise DataError(f"line {lineno}: malformed or repeated dataset header")
            M, A = _ints(tok[2:], lineno, "dataset")
            if M < 1 or A < 1:
                raise DataError(f"line {lineno}: alphabet sizes must be >= 1")
            header = (tok[1], M, A)
            continue
        if header is None:
            raise DataError(f"line {lineno}: expected 'dataset' header first")
        _, M, A = header
        if kind == "graph":
            if current is not None:
                raise DataError(f"line {lineno}: 'graph' before 'end' of graph {current[0]}")
            if len(tok) != 3:
                raise DataError(f"line {lineno}: malformed graph record")
            target = None if tok[2] == "-" else _ints(tok[2:], lineno, "graph")[0]
            if target is not None and target < 0:
                raise DataError(f"line {lineno}: negative target {target}")
            current = (tok[1], target, {}, [], lineno)
        elif kind == "v":
            if current is None or len(tok) != 3:
                raise DataError(f"line {lineno}: malformed vertex record")
            idx, label = _ints(tok[1:], lineno, "vertex")
            labels = current[2]
            if idx in labels:
                raise DataError(f"line {lineno}: duplicate vertex index {idx} in graph {current[0]}")
            if idx < 0:
                raise DataError(f"line {lineno}: negative vertex index {idx}")
            if not 1 <= label <= M:
                raise DataError(f"line {lineno}: vertex label {label} outside 1..{M}")
            labels[idx] = label
        elif kind == "e":
            if current is None or len(tok) != 5 or tok[4] not in ("d", "u"):
                raise DataError(f"line {lineno}: malformed arc record")
            s, d, a = _ints(tok[1:4], lineno, "arc")
            labels = current[2]
            for endpoint in (s, d):
                if endpoint not in labels:
                    raise DataError(f"line {lineno}: arc endpoint {endpoint} is not a declared vertex")
            if not 1 <= a <= A:
                raise DataError(f"line {lineno}: arc label {a} outside 1..{A}")
            current[3].append((s, d, a))
            if tok[4] == "u":
                current[3].append((d, s, a))
        elif kind == "end":
            if current is None or len(tok) != 1:
                raise DataError(f"line {lineno}: unexpected 'end'")
            finish(lineno)
            current = None
        else:
            raise DataError(f"line {lineno}: unknown record type {kind!r}")

    if current is not None:
        raise DataError(f"unexpected end of input inside graph {current[0]}")
    if header is None:
        raise DataError("missing 'dataset' header")
    name, M, A = header
    return GraphDataset(graphs, M, A, name)


def serialize_dataset(dataset: GraphDataset) -> str:
    """Inverse of :func:`parse_dataset`; arcs are written as directed records."""
    out = [f"dataset {dataset.name} {dataset.M} {dataset.A}"]
    for g in dataset.graphs:
        out.append(f"graph {g.id} {'-' if g.target is None else g.target}")
        out.extend(f"v {u} {lab}" for u, lab in enumerate(g.labels.tolist()))
        out.extend(f"e {s} {d} {a} d" for s, d, a in g.arcs())
        out.append("end")
    return "\n".join(out) + "\n"


def read_dataset(path) -> GraphDataset:
    with open(path, encoding="utf-8") as fh:
        return parse_dataset(fh)


def write_dataset(dataset: GraphDataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_dataset(dataset))
