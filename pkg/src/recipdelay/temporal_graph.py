"""Timestamped directed follow graph with time-indexed structural queries.

Edges carry an integer day index (one-day granularity). Adjacency lists are
kept sorted by day so every ``*_at(t)`` query is a binary search plus, for
the common-neighbour counts, a set intersection over the visible prefix.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, Iterable, Iterator, NamedTuple

import numpy as np

Node = Hashable


class EdgeListError(ValueError):
    """Malformed or invalid edge record."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class NodeNotFoundError(KeyError):
    pass


class TemporalEdge(NamedTuple):
    src: Node
    dst: Node
    day: int


@dataclass(frozen=True)
class EdgeInfo:
    day: int
    position: int


class _Adjacency:
    """Neighbours of one node sorted by (day, insertion order)."""

    __slots__ = ("days", "nbrs")

    def __init__(self) -> None:
        self.days: list[int] = []
        self.nbrs: list[Node] = []

    def insert(self, day: int, nbr: Node) -> None:
        k = bisect.bisect_right(self.days, day)
        self.days.insert(k, day)
        self.nbrs.insert(k, nbr)

    def remove(self, day: int, nbr: Node) -> None:
        lo = bisect.bisect_left(self.days, day)
        hi = bisect.bisect_right(self.days, day)
        k = self.nbrs.index(nbr, lo, hi)
        del self.days[k]
        del self.nbrs[k]

    def count_at(self, t: int) -> int:
        return bisect.bisect_right(self.days, t)

    def visible(self, t: int) -> list[Node]:
        return self.nbrs[: bisect.bisect_right(self.days, t)]


class DynamicDigraph:
    """Directed graph whose edges appear at integer days.

    Each ordered pair is stored once with its earliest day; the stream
    position of that occurrence is kept for deterministic same-day ordering.
    Use :func:`ingest_edges` to build one from a stream, or :meth:`add_edge`
    to grow it incrementally.
    """

    def __init__(self) -> None:
        self._edges: dict[tuple[Node, Node], EdgeInfo] = {}
        self._out: dict[Node, _Adjacency] = {}
        self._in: dict[Node, _Adjacency] = {}
        self._join: dict[Node, int] = {}
        self._position = 0
        self._node_days: np.ndarray | None = None
        self._edge_days: np.ndarray | None = None

    # -- construction -----------------------------------------------------

    def add_edge(self, src: Node, dst: Node, day: int) -> bool:
        """Insert one follow event. Returns True if the graph changed."""
        if day < 0:
            raise EdgeListError(f"negative day {day} for edge {src!r}->{dst!r}")
        if src == dst:
            raise EdgeListError(f"self-follow rejected for node {src!r}")
        day = int(day)
        position = self._position
        self._position += 1
        key = (src, dst)
        old = self._edges.get(key)
        if old is not None:
            if old.day <= day:
                return False
            self._out[src].remove(old.day, dst)
            self._in[dst].remove(old.day, src)
        self._edges[key] = EdgeInfo(day, position)
        self._out.setdefault(src, _Adjacency()).insert(day, dst)
        self._in.setdefault(dst, _Adjacency()).insert(day, src)
        self._out.setdefault(dst, _Adjacency())
        self._in.setdefault(src, _Adjacency())
        for node in (src, dst):
            j = self._join.get(node)
            if j is None or day < j:
                self._join[node] = day
        self._node_days = None
        self._edge_days = None
        return True

    # -- basic accessors --------------------------------------------------

    def __contains__(self, node: object) -> bool:
        return node in self._join

    def __len__(self) -> int:
        return len(self._join)

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    def nodes(self) -> Iterator[Node]:
        return iter(self._join)

    def edges(self) -> Iterator[tuple[Node, Node, EdgeInfo]]:
        for (s, d), info in self._edges.items():
            yield s, d, info

    def edge(self, src: Node, dst: Node) -> EdgeInfo | None:
        return self._edges.get((src, dst))

    def has_edge(self, src: Node, dst: Node) -> bool:
        return (src, dst) in self._edges

    def join_day(self, v: Node) -> int:
        try:
            return self._join[v]
        except KeyError:
            raise NodeNotFoundError(v) from None

    @property
    def max_day(self) -> int:
        """Largest edge day, or -1 for an empty graph."""
        days = self._sorted_edge_days()
        return int(days[-1]) if len(days) else -1

    def _check(self, v: Node) -> None:
        if v not in self._join:
            raise NodeNotFoundError(v)

    # -- time-indexed queries ---------------------------------------------

    def indegree_at(self, v: Node, t: int) -> int:
        self._check(v)
        return self._in[v].count_at(t)

    def outdegree_at(self, v: Node, t: int) -> int:
        self._check(v)
        return self._out[v].count_at(t)

    def followees_at(self, v: Node, t: int) -> list[Node]:
        self._check(v)
        return self._out[v].visible(t)

    def followers_at(self, v: Node, t: int) -> list[Node]:
        self._check(v)
        return self._in[v].visible(t)

    def common_followees_at(self, u: Node, v: Node, t: int) -> int:
        self._check(u)
        self._check(v)
        return _intersection_size(self._out[u].visible(t), self._out[v].visible(t))

    def common_followers_at(self, u: Node, v: Node, t: int) -> int:
        self._check(u)
        self._check(v)
        return _intersection_size(self._in[u].visible(t), self._in[v].visible(t))

    def snapshot_counts(self, t: int) -> tuple[int, int]:
        """(n(t), e(t)): nodes joined and edges created by day ``t``."""
        if t < 0:
            return 0, 0
        n = int(np.searchsorted(self._sorted_node_days(), t, side="right"))
        e = int(np.searchsorted(self._sorted_edge_days(), t, side="right"))
        return n, e

    def _sorted_node_days(self) -> np.ndarray:
        if self._node_days is None:
            self._node_days = np.sort(np.fromiter(self._join.values(), dtype=np.int64, count=len(self._join)))
        return self._node_days

    def _sorted_edge_days(self) -> np.ndarray:
        if self._edge_days is None:
            self._edge_days = np.sort(
                np.fromiter((e.day for e in self._edges.values()), dtype=np.int64, count=len(self._edges))
            )
        return self._edge_days

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DynamicDigraph):
            return NotImplemented
        return (
            {k: v.day for k, v in self._edges.items()} == {k: v.day for k, v in other._edges.items()}
            and self._join == other._join
        )


def _intersection_size(a: list, b: list) -> int:
    if len(a) > len(b):
        a, b = b, a
    if not a:
        return 0
    sb = set(b)
    return sum(1 for x in a if x in sb)


def ingest_edges(stream: Iterable[TemporalEdge | tuple], graph: DynamicDigraph | None = None) -> DynamicDigraph:
    """Build (or extend) a graph from ``(src, dst, day)`` records."""
    g = DynamicDigraph() if graph is None else graph
    for rec in stream:
        src, dst, day = rec
        g.add_edge(src, dst, day)
    return g


# Module-level query wrappers, for callers that prefer a functional style.

def indegree_at(g: DynamicDigraph, v: Node, t: int) -> int:
    return g.indegree_at(v, t)


def outdegree_at(g: DynamicDigraph, v: Node, t: int) -> int:
    return g.outdegree_at(v, t)


def common_followees_at(g: DynamicDigraph, u: Node, v: Node, t: int) -> int:
    return g.common_followees_at(u, v, t)


def common_followers_at(g: DynamicDigraph, u: Node, v: Node, t: int) -> int:
    return g.common_followers_at(u, v, t)


def snapshot_counts(g: DynamicDigraph, t: int) -> tuple[int, int]:
    return g.snapshot_counts(t)


# -- edge-list files ---------------------------------------------------------

def parse_edge_lines(lines: Iterable[str]) -> Iterator[TemporalEdge]:
    """Parse ``src<TAB>dst<TAB>day`` lines; ``#`` lines and blanks are skipped."""
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise EdgeListError(f"expected 3 tab-separated fields, got {len(parts)}", lineno)
        src, dst, day_s = parts
        if not src or not dst or any(c.isspace() for c in src + dst):
            raise EdgeListError("node identifiers must be non-empty and contain no whitespace", lineno)
        try:
            day = int(day_s)
        except ValueError:
            raise EdgeListError(f"day {day_s!r} is not an integer", lineno) from None
        if day < 0:
            raise EdgeListError(f"negative day {day}", lineno)
        if src == dst:
            raise EdgeListError(f"self-follow rejected for node {src!r}", lineno)
        yield TemporalEdge(src, dst, day)


def read_edge_list(path: str | Path) -> list[TemporalEdge]:
    with open(path, encoding="utf-8") as fh:
        return list(parse_edge_lines(fh))


def load_graph(path: str | Path) -> DynamicDigraph:
    return ingest_edges(read_edge_list(path))


def write_edge_list(path: str | Path, edges: Iterable[TemporalEdge | tuple], header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for src, dst, day in edges:
            fh.write(f"{src}\t{dst}\t{int(day)}\n")
