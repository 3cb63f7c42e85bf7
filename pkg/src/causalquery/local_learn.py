"""Local structure discovery around a single target (PC-Select style)."""
from __future__ import annotations

from itertools import combinations
from typing import Callable, Iterable, Sequence

from .ci_test import CITestResult

CITest = Callable[[str, str, Sequence[str]], CITestResult]

DEFAULT_MAX_COND = 3


class TargetMissing(ValueError):
    pass


def local_adjacency(
    variables: Sequence[str],
    target: str,
    test: CITest,
    max_cond: int = DEFAULT_MAX_COND,
    sepsets: dict | None = None,
) -> frozenset:
    """Variables that no conditioning set drawn from the survivors separates from ``target``.

    Conditioning sets grow from size 0 to ``max_cond``. Within one round all
    tests use the candidate set as it stood at the start of the round and
    removals are applied together at the end; a size is repeated until a
    round removes nothing. Separating sets are tried in lexicographic order
    of the variable order given, and the first one that passes is recorded
    in ``sepsets`` (if provided) as ``sepsets[x] = S``.
    """
    variables = list(variables)
    if target not in variables:
        raise TargetMissing(f"target {target!r} is not among the variables")
    if max_cond < 0:
        raise ValueError("max_cond must be non-negative")
    cands = [v for v in variables if v != target]
    for size in range(max_cond + 1):
        while len(cands) - 1 >= size:
            removed = {}
            for x in cands:
                rest = [v for v in cands if v != x]
                for s in combinations(rest, size):
                    if test(x, target, s).independent:
                        removed[x] = frozenset(s)
                        break
            if not removed:
                break
            cands = [v for v in cands if v not in removed]
            if sepsets is not None:
                sepsets.update(removed)
            if size == 0:
                # a single pass suffices: the empty set does not depend on cands
                break
    return frozenset(cands)


def find_candidates(
    variables: Sequence[str],
    w: str,
    y: str,
    test: CITest,
    max_cond: int = DEFAULT_MAX_COND,
    pretreatment: Iterable[str] | None = None,
    sepsets: dict | None = None,
) -> frozenset:
    """Candidate adjustment variables ``(Adj(w) - {y}) | (Adj(y) - {w})``.

    Candidates are restricted to ``pretreatment`` when given. ``sepsets``
    receives ``{"w": {...}, "y": {...}}`` audit records.
    """
    pre = None if pretreatment is None else frozenset(pretreatment)
    sep_w: dict = {}
    sep_y: dict = {}
    adj_w = local_adjacency(variables, w, test, max_cond, sep_w) - {y}
    adj_y = local_adjacency(variables, y, test, max_cond, sep_y) - {w}
    if pre is not None:
        adj_w &= pre
        adj_y &= pre
    if sepsets is not None:
        sepsets["w"] = sep_w
        sepsets["y"] = sep_y
    return adj_w | adj_y
