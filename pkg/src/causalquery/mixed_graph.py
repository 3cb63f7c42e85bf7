"""Mixed graphs with directed and bidirected edges.

A :class:`MixedGraph` is the common representation for DAGs and maximal
ancestral graphs (MAGs). Graphs are validated on construction and are
immutable afterwards; every derived index (parents, children, spouses,
ancestors, descendants) is computed once.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence


class GraphError(ValueError):
    pass


class DuplicateLabel(GraphError):
    pass


class UnknownEndpoint(GraphError):
    pass


class UnknownNode(GraphError):
    pass


class ParallelEdge(GraphError):
    pass


class DirectedCycle(GraphError):
    pass


class AlmostDirectedCycle(GraphError):
    pass


class MissingTreatmentEdge(GraphError):
    pass


class EdgeKind(str, Enum):
    DIRECTED = "->"
    BIDIRECTED = "<->"


@dataclass(frozen=True)
class Edge:
    tail: str
    head: str
    kind: EdgeKind = EdgeKind.DIRECTED

    def into(self, node: str) -> bool:
        """True if the edge has an arrowhead at ``node``."""
        if node != self.tail and node != self.head:
            raise UnknownEndpoint(f"{node!r} is not an endpoint of {self}")
        return self.kind is EdgeKind.BIDIRECTED or node == self.head

    def other(self, node: str) -> str:
        if node == self.tail:
            return self.head
        if node == self.head:
            return self.tail
        raise UnknownEndpoint(f"{node!r} is not an endpoint of {self}")

    def __str__(self):
        return f"{self.tail} {self.kind.value} {self.head}"


@dataclass(frozen=True)
class Path:
    """A sequence of distinct nodes with the edge used at every step."""

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        if len(self.edges) != len(self.nodes) - 1:
            raise GraphError("a path over k nodes needs k-1 edges")
        if len(set(self.nodes)) != len(self.nodes):
            raise GraphError(f"path nodes are not distinct: {self.nodes}")
        for i, e in enumerate(self.edges):
            if {e.tail, e.head} != {self.nodes[i], self.nodes[i + 1]}:
                raise GraphError(f"edge {e} does not join {self.nodes[i]} and {self.nodes[i + 1]}")

    def __len__(self):
        return len(self.nodes)

    def __str__(self):
        parts = [self.nodes[0]]
        for i, e in enumerate(self.edges):
            nxt = self.nodes[i + 1]
            if e.kind is EdgeKind.BIDIRECTED:
                arrow = "<->"
            elif e.head == nxt:
                arrow = "->"
            else:
                arrow = "<-"
            parts += [arrow, nxt]
        return " ".join(parts)


def _parse_kind(kind) -> EdgeKind:
    if isinstance(kind, EdgeKind):
        return kind
    try:
        return EdgeKind(kind)
    except ValueError:
        aliases = {"directed": EdgeKind.DIRECTED, "bidirected": EdgeKind.BIDIRECTED}
        if str(kind).lower() in aliases:
            return aliases[str(kind).lower()]
        raise GraphError(f"unknown edge kind {kind!r}") from None


class MixedGraph:
    """An ancestral graph over labelled nodes.

    Construction rejects duplicate labels, unknown endpoints, self loops,
    parallel edges, directed cycles and almost directed cycles (a bidirected
    edge ``a <-> b`` where ``b`` is an ancestor of ``a``).

    Parameters
    ----------
    nodes:
        Node labels. The order fixes the node indices.
    edges:
        :class:`Edge` objects or ``(tail, head, kind)`` tuples where kind is
        ``"->"`` or ``"<->"``. A 2-tuple means a directed edge.
    """

    def __init__(self, nodes: Sequence[str], edges: Iterable = ()):
        nodes = tuple(str(v) for v in nodes)
        seen = set()
        for v in nodes:
            if v in seen:
                raise DuplicateLabel(f"duplicate node label {v!r}")
            seen.add(v)
        self._nodes = nodes
        self._index = {v: i for i, v in enumerate(nodes)}

        self._between: dict[frozenset, Edge] = {}
        pa = {v: set() for v in nodes}
        ch = {v: set() for v in nodes}
        sp = {v: set() for v in nodes}
        for item in edges:
            e = item if isinstance(item, Edge) else _edge_from_tuple(item)
            for end in (e.tail, e.head):
                if end not in self._index:
                    raise UnknownEndpoint(f"edge {e} refers to undeclared node {end!r}")
            if e.tail == e.head:
                raise GraphError(f"self loop at {e.tail!r}")
            key = frozenset((e.tail, e.head))
            if key in self._between:
                raise ParallelEdge(f"second edge between {e.tail!r} and {e.head!r}: {e}")
            if e.kind is EdgeKind.BIDIRECTED and self._index[e.tail] > self._index[e.head]:
                e = Edge(e.head, e.tail, e.kind)
            self._between[key] = e
            if e.kind is EdgeKind.DIRECTED:
                pa[e.head].add(e.tail)
                ch[e.tail].add(e.head)
            else:
                sp[e.head].add(e.tail)
                sp[e.tail].add(e.head)

        self._pa = {v: frozenset(s) for v, s in pa.items()}
        self._ch = {v: frozenset(s) for v, s in ch.items()}
        self._sp = {v: frozenset(s) for v, s in sp.items()}
        self._order = self._topological_order()
        self._an = self._closure(self._order, self._pa)
        self._de = self._closure(self._order[::-1], self._ch)
        for e in self._between.values():
            if e.kind is EdgeKind.BIDIRECTED:
                if e.head in self._an[e.tail] or e.tail in self._an[e.head]:
                    raise AlmostDirectedCycle(
                        f"{e} lies on an almost directed cycle: one endpoint is an ancestor of the other"
                    )
        self._incident = {
            v: tuple(sorted(
                (self._between[frozenset((v, u))] for u in pa[v] | ch[v] | sp[v]),
                key=lambda e: self._index[e.other(v)],
            ))
            for v in nodes
        }

    def _topological_order(self) -> tuple[str, ...]:
        indeg = {v: len(self._pa[v]) for v in self._nodes}
        ready = [v for v in self._nodes if indeg[v] == 0]
        order = []
        while ready:
            # lowest index first, so the order is deterministic
            ready.sort(key=self._index.__getitem__, reverse=True)
            v = ready.pop()
            order.append(v)
            for c in self._ch[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if len(order) != len(self._nodes):
            stuck = sorted((v for v in self._nodes if indeg[v] > 0), key=self._index.__getitem__)
            raise DirectedCycle(f"directed cycle among {', '.join(stuck)}")
        return tuple(order)

    @staticmethod
    def _closure(order, step) -> dict[str, frozenset]:
        out: dict[str, frozenset] = {}
        for v in order:
            acc = set()
            for u in step[v]:
                acc.add(u)
                acc |= out[u]
            out[v] = frozenset(acc)
        return out

    # -- basic accessors -------------------------------------------------

    @property
    def nodes(self) -> tuple[str, ...]:
        return self._nodes

    @property
    def edges(self) -> tuple[Edge, ...]:
        return tuple(sorted(self._between.values(), key=self._edge_key))

    def _edge_key(self, e: Edge):
        return (self._index[e.tail], self._index[e.head], e.kind.value)

    def __len__(self):
        return len(self._nodes)

    def __contains__(self, v):
        return v in self._index

    def __eq__(self, other):
        if not isinstance(other, MixedGraph):
            return NotImplemented
        return self._nodes == other._nodes and set(self._between.values()) == set(other._between.values())

    def __hash__(self):
        return hash((self._nodes, frozenset(self._between.values())))

    def __repr__(self):
        return f"MixedGraph(nodes={list(self._nodes)}, edges=[{', '.join(map(str, self.edges))}])"

    def index(self, v: str) -> int:
        self._check(v)
        return self._index[v]

    def _check(self, v):
        if v not in self._index:
            raise UnknownNode(f"unknown node {v!r}")

    def edge(self, a: str, b: str) -> Edge | None:
        """The edge between ``a`` and ``b``, or None."""
        self._check(a)
        self._check(b)
        return self._between.get(frozenset((a, b)))

    def has_directed_edge(self, tail: str, head: str) -> bool:
        e = self.edge(tail, head)
        return e is not None and e.kind is EdgeKind.DIRECTED and e.tail == tail

    def incident(self, v: str) -> tuple[Edge, ...]:
        """Edges at ``v`` ordered by the index of the other endpoint."""
        self._check(v)
        return self._incident[v]

    def parents(self, v: str) -> frozenset:
        self._check(v)
        return self._pa[v]

    def children(self, v: str) -> frozenset:
        self._check(v)
        return self._ch[v]

    def spouses(self, v: str) -> frozenset:
        self._check(v)
        return self._sp[v]

    def adjacent(self, v: str) -> frozenset:
        self._check(v)
        return self._pa[v] | self._ch[v] | self._sp[v]

    def ancestors(self, v: str) -> frozenset:
        """Nodes with a directed path into ``v``; ``v`` itself excluded."""
        self._check(v)
        return self._an[v]

    def descendants(self, v: str) -> frozenset:
        self._check(v)
        return self._de[v]

    def ancestors_of_set(self, vs: Iterable[str]) -> frozenset:
        """Union of the members of ``vs`` and all their ancestors."""
        out = set()
        for v in vs:
            self._check(v)
            out.add(v)
            out |= self._an[v]
        return frozenset(out)

    def topological_order(self) -> tuple[str, ...]:
        return self._order

    def is_dag(self) -> bool:
        return all(e.kind is EdgeKind.DIRECTED for e in self._between.values())

    def sorted_nodes(self, vs: Iterable[str]) -> list[str]:
        return sorted(vs, key=self._index.__getitem__)

    # -- serialisation ---------------------------------------------------

    def to_text(self) -> str:
        lines = ["nodes: " + ",".join(self._nodes)]
        lines += [str(e) for e in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MixedGraph":
        nodes = None
        edges = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("nodes:"):
                if nodes is not None:
                    raise GraphError(f"line {lineno}: second 'nodes:' header")
                nodes = [v.strip() for v in line[len("nodes:"):].split(",") if v.strip()]
                continue
            if nodes is None:
                raise GraphError(f"line {lineno}: edge before 'nodes:' header")
            for token in ("<->", "->"):
                if token in line:
                    a, b = (s.strip() for s in line.split(token, 1))
                    if not a or not b:
                        raise GraphError(f"line {lineno}: malformed edge {raw!r}")
                    edges.append((a, b, token))
                    break
            else:
                raise GraphError(f"line {lineno}: cannot parse {raw!r}")
        if nodes is None:
            raise GraphError("missing 'nodes:' header")
        return cls(nodes, edges)


def _edge_from_tuple(item) -> Edge:
    if len(item) == 2:
        return Edge(str(item[0]), str(item[1]), EdgeKind.DIRECTED)
    tail, head, kind = item
    return Edge(str(tail), str(head), _parse_kind(kind))


def build_graph(nodes: Sequence[str], edges: Iterable = ()) -> MixedGraph:
    return MixedGraph(nodes, edges)


def ancestors(g: MixedGraph, v: str) -> frozenset:
    return g.ancestors(v)


def manipulate(g: MixedGraph, w: str, y: str) -> MixedGraph:
    """Return a copy of ``g`` without the directed edge ``w -> y``."""
    if not g.has_directed_edge(w, y):
        raise MissingTreatmentEdge(f"graph has no directed edge {w} -> {y}")
    drop = g.edge(w, y)
    return MixedGraph(g.nodes, [e for e in g.edges if e != drop])


def enumerate_paths(g: MixedGraph, a: str, b: str, max_len: int | None = None) -> list[Path]:
    """All simple paths between ``a`` and ``b`` with at most ``max_len`` edges.

    Test support only: the count grows factorially on dense graphs. Paths
    are ordered by length, then by node indices.
    """
    g.index(a)
    g.index(b)
    if a == b:
        raise GraphError("path endpoints must differ")
    if max_len is None:
        max_len = len(g)
    found = []
    nodes = [a]
    edges: list[Edge] = []
    on_path = {a}

    def extend(v):
        if len(edges) >= max_len:
            return
        for e in g.incident(v):
            u = e.other(v)
            if u in on_path:
                continue
            nodes.append(u)
            edges.append(e)
            if u == b:
                found.append(Path(tuple(nodes), tuple(edges)))
            else:
                on_path.add(u)
                extend(u)
                on_path.discard(u)
            nodes.pop()
            edges.pop()

    extend(a)
    found.sort(key=lambda p: (len(p), [g.index(v) for v in p.nodes]))
    return found
