"""Graphical criteria on mixed graphs.

m-separation, edge visibility, adjustment amenability, back-door paths and
the generalised back-door criterion for MAGs, plus the latent projection
that turns a DAG with hidden nodes into the MAG over its observed nodes.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

from .mixed_graph import (
    Edge,
    EdgeKind,
    GraphError,
    MissingTreatmentEdge,
    MixedGraph,
    Path,
    enumerate_paths,
)

# graphs up to this many nodes are checked path by path in satisfies_gbc
PATH_CAP = 8
DEFAULT_CANDIDATE_CAP = 16


class OverlapError(GraphError):
    pass


class EndpointPosition(GraphError):
    pass


class MissingEdge(GraphError):
    pass


class PathNotAnchored(GraphError):
    pass


class CandidateCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class SeparationQuery:
    x: str
    y: str
    given: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "given", frozenset(self.given))
        if self.x == self.y:
            raise OverlapError("x and y must differ")
        if self.x in self.given or self.y in self.given:
            raise OverlapError(f"{self.x!r} or {self.y!r} is in the conditioning set")


def is_collider_on(path: Path, i: int) -> bool:
    """True if both path edges at position ``i`` have an arrowhead there."""
    if not 0 < i < len(path) - 1:
        raise EndpointPosition(f"position {i} is an endpoint of a {len(path)}-node path")
    v = path.nodes[i]
    return path.edges[i - 1].into(v) and path.edges[i].into(v)


def path_blocked(g: MixedGraph, path: Path, given: Iterable[str]) -> bool:
    """Per-path blocking test used by the path-enumeration form of the criteria."""
    z = frozenset(given)
    for i in range(1, len(path) - 1):
        v = path.nodes[i]
        if is_collider_on(path, i):
            if v not in z and not (g.descendants(v) & z):
                return True
        elif v in z:
            return True
    return False


def _m_reachable(g: MixedGraph, x: str, z: frozenset, skip: frozenset = frozenset()) -> set:
    """Nodes m-connected to ``x`` given ``z``.

    Walks over (node, arrived-with-arrowhead) states: a collider passes when
    it is in ``z`` or has a descendant there, a non-collider passes when it is
    not in ``z``. Edges in ``skip`` are never used as the first step out of
    ``x``.
    """
    an_z = g.ancestors_of_set(z)
    reached = set()
    seen = set()
    queue = deque()
    for e in g.incident(x):
        if e in skip:
            continue
        u = e.other(x)
        queue.append((u, e.into(u)))
    while queue:
        state = queue.popleft()
        if state in seen:
            continue
        seen.add(state)
        v, into_v = state
        reached.add(v)
        for f in g.incident(v):
            u = f.other(v)
            if u == x:
                continue
            if into_v and f.into(v):
                if v not in an_z:
                    continue
            elif v in z:
                continue
            nxt = (u, f.into(u))
            if nxt not in seen:
                queue.append(nxt)
    return reached


def is_m_separated(g: MixedGraph, x: str, y: str | None = None, given: Iterable[str] = ()) -> bool:
    """True if ``x`` and ``y`` are m-separated by ``given`` in ``g``.

    Accepts either ``(g, x, y, given)`` or ``(g, SeparationQuery)``.
    """
    if isinstance(x, SeparationQuery):
        q = x
    else:
        q = SeparationQuery(x, y, frozenset(given))
    for v in (q.x, q.y, *q.given):
        g.index(v)
    return q.y not in _m_reachable(g, q.x, q.given)


def is_visible(g: MixedGraph, tail: str, head: str) -> bool:
    """True if the directed edge ``tail -> head`` is visible in ``g``.

    The edge is visible when some node not adjacent to ``head`` has an edge
    into ``tail``, or reaches ``tail`` through a collider path into ``tail``
    whose interior nodes are all parents of ``head``.
    """
    if not g.has_directed_edge(tail, head):
        raise MissingEdge(f"no directed edge {tail} -> {head}")
    adj_head = g.adjacent(head) | {head}
    pa_head = g.parents(head)

    def witness(v):
        # some node outside adj_head with an edge into v
        return any(e.into(v) and e.other(v) not in adj_head for e in g.incident(v))

    if witness(tail):
        return True
    # interior nodes c1..cm of a collider path into tail: c_m <-> tail,
    # c_i <-> c_{i+1}, every c_i a parent of head
    frontier = [c for c in g.spouses(tail) if c in pa_head]
    seen = set(frontier)
    while frontier:
        c = frontier.pop()
        if witness(c):
            return True
        for d in g.spouses(c):
            if d in pa_head and d not in seen and d != tail:
                seen.add(d)
                frontier.append(d)
    return False


def is_amenable(g: MixedGraph, w: str, y: str) -> bool:
    """True if ``w -> y`` is a directed, visible edge of ``g``."""
    g.index(w)
    g.index(y)
    return g.has_directed_edge(w, y) and is_visible(g, w, y)


def _visible_out_edges(g: MixedGraph, w: str) -> frozenset:
    return frozenset(
        e for e in g.incident(w)
        if e.kind is EdgeKind.DIRECTED and e.tail == w and is_visible(g, w, e.head)
    )


def is_backdoor_path(g: MixedGraph, path: Path, w: str) -> bool:
    """True unless the first edge of ``path`` is a visible edge out of ``w``."""
    if path.nodes[0] != w:
        raise PathNotAnchored(f"path {path} does not start at {w!r}")
    first = path.edges[0]
    if first.kind is EdgeKind.DIRECTED and first.tail == w:
        return not is_visible(g, w, first.head)
    return True


def backdoor_paths(g: MixedGraph, w: str, y: str) -> list[Path]:
    return [p for p in enumerate_paths(g, w, y) if is_backdoor_path(g, p, w)]


def satisfies_gbc(
    g: MixedGraph, w: str, y: str, z: Iterable[str], method: str | None = None
) -> bool:
    """Generalised back-door criterion for ``z`` relative to ``(w, y)``.

    ``method`` is ``"paths"`` (enumerate and test every back-door path) or
    ``"reach"`` (m-reachability from ``w`` skipping its visible out-edges).
    By default graphs of at most ``PATH_CAP`` nodes use ``"paths"``.
    """
    z = frozenset(z)
    for v in (w, y, *z):
        g.index(v)
    if w == y:
        raise OverlapError("w and y must differ")
    if w in z or y in z:
        raise OverlapError("z must not contain w or y")
    if z & g.descendants(w):
        return False
    if method is None:
        method = "paths" if len(g) <= PATH_CAP else "reach"
    if method == "paths":
        return all(path_blocked(g, p, z) for p in backdoor_paths(g, w, y))
    if method == "reach":
        # once z holds no descendant of w, dropping w's visible out-edges
        # leaves An(z) unchanged, so reachability in g is exact
        return y not in _m_reachable(g, w, z, skip=_visible_out_edges(g, w))
    raise ValueError(f"unknown method {method!r}")


def enumerate_adjustment_sets(
    g: MixedGraph, w: str, y: str, candidates: Iterable[str], cap: int = DEFAULT_CANDIDATE_CAP,
    method: str | None = "reach",
) -> list[frozenset]:
    """Every subset of ``candidates`` satisfying the generalised back-door criterion.

    Ordered by size, then lexicographically by node index.
    """
    cands = g.sorted_nodes(set(candidates))
    if len(cands) > cap:
        raise CandidateCapExceeded(f"{len(cands)} candidates exceed the cap of {cap}")
    out = []
    for k in range(len(cands) + 1):
        for combo in combinations(cands, k):
            if satisfies_gbc(g, w, y, combo, method=method):
                out.append(frozenset(combo))
    return out


def adjacency_union(g: MixedGraph, w: str, y: str) -> frozenset:
    """Adj(w) | Adj(y) in the graph with ``w -> y`` removed, minus w and y."""
    from .mixed_graph import manipulate

    m = manipulate(g, w, y) if g.has_directed_edge(w, y) else g
    return (m.adjacent(w) | m.adjacent(y)) - {w, y}


def latent_projection(dag: MixedGraph, hidden: Iterable[str]) -> MixedGraph:
    """The MAG over the observed nodes of ``dag`` after marginalising ``hidden``.

    Observed ``a`` and ``b`` are adjacent iff no set of observed nodes
    d-separates them, which holds iff they are d-connected given the observed
    ancestors of ``{a, b}``. Adjacent pairs are oriented ``a -> b`` when ``a``
    is an ancestor of ``b`` in ``dag`` and ``a <-> b`` when neither is an
    ancestor of the other.
    """
    if not dag.is_dag():
        raise GraphError("latent projection expects a DAG")
    hidden = frozenset(hidden)
    for v in hidden:
        dag.index(v)
    observed = [v for v in dag.nodes if v not in hidden]
    edges = []
    for a, b in combinations(observed, 2):
        cond = (dag.ancestors_of_set((a, b)) - hidden) - {a, b}
        if b in _m_reachable(dag, a, cond):
            if a in dag.ancestors(b):
                edges.append(Edge(a, b, EdgeKind.DIRECTED))
            elif b in dag.ancestors(a):
                edges.append(Edge(b, a, EdgeKind.DIRECTED))
            else:
                edges.append(Edge(a, b, EdgeKind.BIDIRECTED))
    return MixedGraph(observed, edges)


__all__ = [
    "CandidateCapExceeded",
    "EndpointPosition",
    "MissingEdge",
    "MissingTreatmentEdge",
    "OverlapError",
    "PathNotAnchored",
    "SeparationQuery",
    "adjacency_union",
    "backdoor_paths",
    "enumerate_adjustment_sets",
    "is_amenable",
    "is_backdoor_path",
    "is_collider_on",
    "is_m_separated",
    "is_visible",
    "latent_projection",
    "path_blocked",
    "satisfies_gbc",
]
