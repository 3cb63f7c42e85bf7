"""Synthetic data from linear structural equation models with hidden nodes.

A :class:`SemSpec` declares a DAG with edge coefficients, noise scales,
hidden nodes and a logistic treatment-assignment model. :func:`generate`
samples it, drops the hidden columns, and returns the MAG over the
observed columns as ground truth.

Spec file format (``#`` starts a comment)::

    nodes: X1, X2, U1, W, Y
    hidden: U1
    treatment: W
    outcome: Y
    noise: X1=1.0, Y=0.5          # default 1.0
    assignment: intercept=0.0, epsilon=0.1
    distractors: 0
    X1 -> W : 0.8
    U1 -> X2 : 1.2
    W -> Y : 1.0
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Iterable

import numpy as np

from .ci_test import Dataset
from .criteria import latent_projection
from .mixed_graph import DirectedCycle, GraphError, MixedGraph


class SpecError(ValueError):
    pass


class SpecParseError(SpecError):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class CyclicSpec(SpecError):
    pass


class MissingRole(SpecError):
    pass


@dataclass(frozen=True)
class SemSpec:
    nodes: tuple[str, ...]
    edges: dict = field(default_factory=dict)
    treatment: str | None = None
    outcome: str | None = None
    hidden: frozenset = frozenset()
    noise: dict = field(default_factory=dict)
    intercept: float = 0.0
    epsilon: float = 0.1
    distractors: int = 0
    name: str = "sem"

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "hidden", frozenset(self.hidden))
        object.__setattr__(self, "edges", {(a, b): float(c) for (a, b), c in dict(self.edges).items()})
        object.__setattr__(self, "noise", {k: float(v) for k, v in dict(self.noise).items()})

    def validate(self) -> None:
        if self.treatment is None or self.outcome is None:
            raise MissingRole("spec needs a treatment and an outcome")
        known = set(self.nodes)
        if len(known) != len(self.nodes):
            raise SpecError("duplicate node names")
        for v in (self.treatment, self.outcome, *self.hidden, *self.noise):
            if v not in known:
                raise SpecError(f"unknown node {v!r}")
        if self.treatment == self.outcome:
            raise SpecError("treatment and outcome must differ")
        if self.treatment in self.hidden or self.outcome in self.hidden:
            raise SpecError("treatment and outcome must be observed")
        for (a, b) in self.edges:
            if a not in known or b not in known:
                raise SpecError(f"edge {a} -> {b} uses an undeclared node")
        if any(sd < 0 for sd in self.noise.values()) or self.epsilon < 0:
            raise SpecError("noise scales must be non-negative")
        if self.distractors < 0:
            raise SpecError("distractor count must be non-negative")
        self.dag()

    def dag(self) -> MixedGraph:
        for a, b in self.edges:
            if (b, a) in self.edges:
                raise CyclicSpec(f"edges {a} -> {b} and {b} -> {a} form a cycle")
        try:
            return MixedGraph(self.nodes, list(self.edges))
        except DirectedCycle as exc:
            raise CyclicSpec(str(exc)) from None
        except GraphError as exc:
            raise SpecError(str(exc)) from None

    def observed(self) -> list[str]:
        return [v for v in self.nodes if v not in self.hidden]

    @property
    def true_effect(self) -> float:
        return self.edges.get((self.treatment, self.outcome), 0.0)

    def noise_sd(self, v: str) -> float:
        return self.noise.get(v, 1.0)

    def truth_graph(self) -> MixedGraph:
        """MAG over the observed nodes plus isolated distractor nodes."""
        mag = latent_projection(self.dag(), self.hidden)
        if not self.distractors:
            return mag
        return MixedGraph(list(mag.nodes) + distractor_labels(mag.nodes, self.distractors), mag.edges)

    def to_text(self) -> str:
        lines = [f"# {self.name}", "nodes: " + ", ".join(self.nodes)]
        if self.hidden:
            lines.append("hidden: " + ", ".join(v for v in self.nodes if v in self.hidden))
        lines.append(f"treatment: {self.treatment}")
        lines.append(f"outcome: {self.outcome}")
        if self.noise:
            lines.append("noise: " + ", ".join(f"{k}={_num(v)}" for k, v in self.noise.items()))
        lines.append(f"assignment: intercept={_num(self.intercept)}, epsilon={_num(self.epsilon)}")
        lines.append(f"distractors: {self.distractors}")
        lines += [f"{a} -> {b} : {_num(c)}" for (a, b), c in self.edges.items()]
        return "\n".join(lines) + "\n"


def _num(v: float) -> str:
    return repr(float(v))


def _key_values(text: str, lineno: int) -> dict:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise SpecParseError(lineno, f"expected name=value, got {part!r}")
        k, v = (s.strip() for s in part.split("=", 1))
        try:
            out[k] = float(v)
        except ValueError:
            raise SpecParseError(lineno, f"{v!r} is not a number") from None
    return out


def parse_spec(text: str, name: str = "sem") -> SemSpec:
    nodes = None
    fields: dict = {"hidden": [], "noise": {}, "edges": {}}
    first_comment = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if stripped.startswith("#") and first_comment is None:
            first_comment = stripped.lstrip("#").strip()
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" in line:
            if nodes is None:
                raise SpecParseError(lineno, "edge before 'nodes:'")
            lhs, sep, coef = line.partition(":")
            if not sep:
                raise SpecParseError(lineno, "edge needs a coefficient, e.g. 'A -> B : 0.5'")
            a, _, b = (s.strip() for s in lhs.partition("->"))
            for v in (a, b):
                if v not in nodes:
                    raise SpecParseError(lineno, f"unknown node {v!r}")
            if (a, b) in fields["edges"]:
                raise SpecParseError(lineno, f"duplicate edge {a} -> {b}")
            try:
                fields["edges"][(a, b)] = float(coef)
            except ValueError:
                raise SpecParseError(lineno, f"{coef.strip()!r} is not a number") from None
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise SpecParseError(lineno, f"cannot parse {raw.strip()!r}")
        key, value = key.strip().lower(), value.strip()
        if key == "nodes":
            nodes = [v.strip() for v in value.split(",") if v.strip()]
            if len(set(nodes)) != len(nodes):
                raise SpecParseError(lineno, "duplicate node names")
        elif key == "hidden":
            fields["hidden"] = [v.strip() for v in value.split(",") if v.strip()]
        elif key in ("treatment", "outcome"):
            fields[key] = value
        elif key == "noise":
            fields["noise"].update(_key_values(value, lineno))
        elif key == "assignment":
            kv = _key_values(value, lineno)
            unknown = set(kv) - {"intercept", "epsilon"}
            if unknown:
                raise SpecParseError(lineno, f"unknown assignment parameter(s) {sorted(unknown)}")
            fields.update(kv)
        elif key == "distractors":
            try:
                fields["distractors"] = int(value)
            except ValueError:
                raise SpecParseError(lineno, f"{value!r} is not an integer") from None
        else:
            raise SpecParseError(lineno, f"unknown key {key!r}")
        if nodes is not None:
            for v in fields.get("hidden", []) + [fields.get("treatment"), fields.get("outcome")] + list(fields["noise"]):
                if v is not None and v not in nodes:
                    raise SpecParseError(lineno, f"unknown node {v!r}")
    if nodes is None:
        raise SpecError("spec has no 'nodes:' line")
    spec = SemSpec(nodes=nodes, name=first_comment or name, **fields)
    spec.validate()
    return spec


def load_spec(path) -> SemSpec:
    path = Path(path)
    return parse_spec(path.read_text(), name=path.stem)


def bench10() -> SemSpec:
    """The shipped BENCH-10 model: 8 pretreatment columns, 2 hidden, W and Y."""
    text = resources.files("causalquery").joinpath("data/bench10.sem").read_text()
    return parse_spec(text, name="bench10")


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


def distractor_labels(existing: Iterable[str], count: int) -> list[str]:
    taken = set(existing)
    out = []
    i = 1
    while len(out) < count:
        label = f"R{i}"
        if label not in taken:
            out.append(label)
        i += 1
    return out


def add_distractors(data: Dataset, count: int, seed: int) -> Dataset:
    """Append ``count`` independent standard-normal columns."""
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return data
    rng = np.random.default_rng([int(seed), 0xD15])
    labels = distractor_labels(data.columns, count)
    extra = rng.standard_normal((data.n, count))
    pre = list(data.pretreatment) + labels
    return Dataset(list(data.columns) + labels, np.hstack([data.values, extra]),
                   data.treatment, data.outcome, pre)


def generate(spec: SemSpec, n: int, seed: int) -> tuple[Dataset, MixedGraph, float]:
    """Sample ``n`` rows from ``spec``.

    Returns the dataset (hidden columns dropped, distractors appended), the
    truth MAG over its columns, and the treatment's structural coefficient
    on the outcome.
    """
    spec.validate()
    if n < 1:
        raise ValueError("n must be at least 1")
    dag = spec.dag()
    rng = np.random.default_rng(int(seed))
    cols = {}
    for v in dag.topological_order():
        val = np.zeros(n)
        for p in dag.parents(v):
            val += spec.edges[(p, v)] * cols[p]
        if v == spec.treatment:
            score = spec.intercept + val + spec.epsilon * rng.standard_normal(n)
            val = (rng.random(n) < _sigmoid(score)).astype(float)
        else:
            val += spec.noise_sd(v) * rng.standard_normal(n)
        cols[v] = val
    observed = spec.observed()
    data = Dataset(observed, np.column_stack([cols[v] for v in observed]), spec.treatment, spec.outcome)
    data = add_distractors(data, spec.distractors, seed)
    return data, spec.truth_graph(), spec.true_effect


@dataclass(frozen=True)
class BenchScore:
    precision: float
    recall: float
    f_score: float


def score_discovery(found: Iterable[str], truth: Iterable[str]) -> BenchScore:
    found, truth = set(found), set(truth)
    hit = len(found & truth)
    if not found:
        precision = 1.0 if not truth else 0.0
    else:
        precision = hit / len(found)
    recall = 1.0 if not truth else hit / len(truth)
    f = 0.0 if precision == 0 or recall == 0 else 2 * precision * recall / (precision + recall)
    return BenchScore(precision, recall, f)


# -- random structures for property tests -----------------------------------


def random_dag(rng: random.Random, names: list[str], density: float) -> MixedGraph:
    """Random DAG whose topological order is ``names``."""
    edges = [(a, b) for a, b in combinations(names, 2) if rng.random() < density]
    return MixedGraph(names, edges)


def random_mag(rng: random.Random, n_observed: int, n_hidden: int, density: float = 0.4) -> MixedGraph:
    """Latent projection of a random DAG; always a valid MAG."""
    names = [f"V{i}" for i in range(n_observed + n_hidden)]
    rng.shuffle(names)
    dag = random_dag(rng, names, density)
    hidden = rng.sample(names, n_hidden)
    return latent_projection(dag, hidden)


def random_pretreatment_mag(
    rng: random.Random, n_observed: int, n_hidden: int, density: float = 0.4
) -> MixedGraph:
    """Random MAG over X0.., W, Y with W -> Y and every X a non-descendant of W and Y."""
    names = [f"X{i}" for i in range(n_observed + n_hidden)]
    rng.shuffle(names)
    order = names + ["W", "Y"]
    edges = [(a, b) for a, b in combinations(order, 2) if (a, b) == ("W", "Y") or rng.random() < density]
    hidden = rng.sample(names, n_hidden)
    return latent_projection(MixedGraph(order, edges), hidden)


def random_spec(rng: random.Random, n_observed: int, n_hidden: int, density: float = 0.4,
                effect: float = 1.0) -> SemSpec:
    """Random pretreatment SEM; coefficients uniform in +-[0.5, 1.5]."""
    names = [f"X{i}" for i in range(n_observed)] + [f"U{i}" for i in range(n_hidden)]
    rng.shuffle(names)
    order = names + ["W", "Y"]
    edges = {}
    for a, b in combinations(order, 2):
        if (a, b) == ("W", "Y"):
            edges[(a, b)] = effect
        elif rng.random() < density:
            edges[(a, b)] = rng.choice((-1, 1)) * rng.uniform(0.5, 1.5)
    return SemSpec(order, edges, "W", "Y", hidden=[v for v in names if v.startswith("U")], name="random")
