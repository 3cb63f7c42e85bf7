"""DICE: local adjustment-set discovery and the adjustment-set / causal-effect table.

:func:`run_dice` finds the candidate adjustment variables around the
treatment and outcome, estimates the effect for every subset of them,
scores each candidate by how much including it moves the estimate, and
drops the rows of low-sensitivity candidates. The result is an
:class:`Ascet` (adjustment set / causal effect table).
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .ci_test import Dataset, FisherZTest, format_number
from .criteria import CandidateCapExceeded, is_amenable, satisfies_gbc
from .effect_est import Estimand, EstimationError, psm_effect
from .local_learn import DEFAULT_MAX_COND, local_adjacency
from .mixed_graph import MixedGraph

log = logging.getLogger(__name__)

MAX_CANDIDATES_LIMIT = 24

STATUS_OK = "ok"
STATUS_NOT_FOUND = "not_found"
STATUS_NOT_AMENABLE = "not_amenable"
NOT_FOUND_MESSAGE = "Adjustment set could not be found"


class AscetError(ValueError):
    pass


class MissingRows(AscetError):
    pass


class EmptyAscet(AscetError):
    pass


@dataclass(frozen=True)
class DiceConfig:
    alpha: float = 0.05
    tau: float = 0.1
    max_cond: int = DEFAULT_MAX_COND
    estimand: str = "ate"
    max_candidates: int = 16
    bin_divisor: int = 100
    n_jobs: int = 1

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if self.max_cond < 0:
            raise ValueError("max_cond must be non-negative")
        if not 0 <= self.max_candidates <= MAX_CANDIDATES_LIMIT:
            raise ValueError(f"max_candidates must lie in [0, {MAX_CANDIDATES_LIMIT}]")
        if self.bin_divisor < 1:
            raise ValueError("bin_divisor must be positive")
        object.__setattr__(self, "estimand", Estimand(str(self.estimand).lower()).value)


@dataclass(frozen=True)
class AscetRow:
    mask: int
    effect: float
    error: str | None = None
    # generalised back-door verdict, only when a truth graph was supplied
    valid: bool | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class Ascet:
    candidates: tuple[str, ...]
    rows: tuple[AscetRow, ...]
    pruned: tuple[str, ...] = ()
    sensitivities: dict | None = None
    status: str = STATUS_OK
    config: DiceConfig = field(default_factory=DiceConfig)
    unpruned: "Ascet | None" = None
    diagnostics: dict = field(default_factory=dict)

    def subset(self, mask: int) -> tuple[str, ...]:
        return tuple(c for i, c in enumerate(self.candidates) if mask >> i & 1)

    def mask_of(self, subset) -> int:
        subset = set(subset)
        unknown = subset - set(self.candidates)
        if unknown:
            raise AscetError(f"not candidates: {sorted(unknown)}")
        return sum(1 << i for i, c in enumerate(self.candidates) if c in subset)

    def effect(self, subset) -> float:
        mask = self.mask_of(subset)
        for r in self.rows:
            if r.mask == mask:
                return r.effect
        raise MissingRows(f"no row for {sorted(subset)}")

    def effects(self) -> np.ndarray:
        return np.array([r.effect for r in self.rows if r.ok], dtype=float)

    def is_complete(self) -> bool:
        return [r.mask for r in self.rows] == list(range(1 << len(self.candidates)))

    def __len__(self):
        return len(self.rows)

    @classmethod
    def from_table(cls, candidates, rows, config: DiceConfig | None = None) -> "Ascet":
        """Build from ``(subset, effect)`` pairs; subsets are iterables of candidate names."""
        candidates = tuple(candidates)
        proto = cls(candidates, ())
        by_mask = {}
        for subset, effect in rows:
            by_mask[proto.mask_of(subset)] = AscetRow(proto.mask_of(subset), float(effect))
        return cls(candidates, tuple(by_mask[m] for m in sorted(by_mask)), config=config or DiceConfig())

    # -- serialisation -----------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(self.candidates) + ["CE"])
        for r in self.rows:
            bits = [(r.mask >> i) & 1 for i in range(len(self.candidates))]
            w.writerow(bits + [format_number(r.effect) if r.ok else "nan"])
        return buf.getvalue()

    @classmethod
    def read_csv(cls, text: str) -> "Ascet":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if not header or header[-1] != "CE":
            raise AscetError("ASCET CSV must end with a CE column")
        cands = tuple(header[:-1])
        rows = []
        for rec in reader:
            if not rec:
                continue
            mask = sum(int(b) << i for i, b in enumerate(rec[:-1]))
            effect = float(rec[-1])
            rows.append(AscetRow(mask, effect, None if math.isfinite(effect) else "failed"))
        rows.sort(key=lambda r: r.mask)
        return cls(cands, tuple(rows))

    def summary(self, max_y: float | None = None) -> dict:
        full = self.unpruned or self
        out = {
            "status": self.status,
            "candidates": list(full.candidates),
            "sensitivities": {k: _json_num(v) for k, v in (self.sensitivities or {}).items()},
            "pruned": list(self.pruned),
            "kept": list(self.candidates),
            "rows_before_pruning": len(full.rows),
            "rows": len(self.rows),
            "failed_rows": sum(not r.ok for r in full.rows),
            "diagnostics": self.diagnostics,
            "config": asdict(self.config),
        }
        if self.status == STATUS_NOT_FOUND:
            out["message"] = NOT_FOUND_MESSAGE
        if max_y is not None and len(self.effects()):
            out["max_abs_y"] = _json_num(max_y)
            out["most_probable_estimate"] = _json_num(
                most_probable_estimate(self, max_y, self.config.bin_divisor)
            )
        return out


def _json_num(v):
    v = float(v)
    return v if math.isfinite(v) else None


# -- sensitivity and pruning -------------------------------------------------


def _pair_differences(a: Ascet, x: str) -> tuple[list[float], int]:
    if not a.is_complete():
        raise MissingRows(f"sensitivity needs all {1 << len(a.candidates)} rows, table has {len(a.rows)}")
    try:
        bit = 1 << a.candidates.index(x)
    except ValueError:
        raise AscetError(f"{x!r} is not a candidate") from None
    diffs = []
    skipped = 0
    for r in a.rows:
        if r.mask & bit:
            other = a.rows[r.mask ^ bit]
            if r.ok and other.ok:
                diffs.append(abs(r.effect - other.effect))
            else:
                skipped += 1
    return diffs, skipped


def sensitivity(a: Ascet, x: str) -> float:
    """Mean absolute change in the estimate when ``x`` joins a subset.

    Averages ``|CE(Z) - CE(Z - {x})|`` over all subsets ``Z`` containing
    ``x``. Pairs involving a failed row are left out and the divisor shrinks
    with them; NaN when no pair is usable.
    """
    diffs, _ = _pair_differences(a, x)
    return math.fsum(diffs) / len(diffs) if diffs else math.nan


def sensitivities(a: Ascet) -> tuple[dict, dict]:
    """Sensitivity of every candidate, plus the number of skipped pairs per candidate."""
    sens, skipped = {}, {}
    for x in a.candidates:
        diffs, skip = _pair_differences(a, x)
        sens[x] = math.fsum(diffs) / len(diffs) if diffs else math.nan
        skipped[x] = skip
    return sens, skipped


def prune(a: Ascet, tau: float) -> Ascet:
    """Drop every candidate whose sensitivity is below ``tau`` and every row containing it.

    Sensitivities are computed once on the input table. Surviving rows are
    re-indexed over the surviving candidates.
    """
    sens = a.sensitivities
    if sens is None or set(sens) != set(a.candidates):
        sens, _ = sensitivities(a)
    removed = [x for x in a.candidates if sens[x] < tau]
    if not removed:
        return replace(a, sensitivities=dict(sens), unpruned=a)
    drop = a.mask_of(removed)
    keep = [c for c in a.candidates if c not in removed]
    positions = [a.candidates.index(c) for c in keep]
    rows = []
    for r in a.rows:
        if r.mask & drop:
            continue
        mask = sum(1 << j for j, pos in enumerate(positions) if r.mask >> pos & 1)
        rows.append(replace(r, mask=mask))
    rows.sort(key=lambda r: r.mask)
    return replace(
        a, candidates=tuple(keep), rows=tuple(rows), pruned=tuple(a.pruned) + tuple(removed),
        sensitivities=dict(sens), unpruned=a,
    )


# -- most probable estimate --------------------------------------------------


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    means: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin", "left", "right", "count", "mean"])
        for i, c in enumerate(self.counts):
            w.writerow([i, repr(float(self.edges[i])), repr(float(self.edges[i + 1])), int(c),
                        repr(float(self.means[i])) if c else ""])
        return buf.getvalue()


def histogram(a: Ascet, max_y: float, bin_divisor: int = 100) -> Histogram:
    """Histogram of row effects with bin width ``max_y / bin_divisor`` starting at the smallest effect."""
    effects = a.effects()
    if len(effects) == 0:
        raise EmptyAscet("ASCET has no estimated rows")
    if not max_y > 0:
        raise ValueError("max_y must be positive")
    width = max_y / bin_divisor
    lo = float(effects.min())
    idx = np.floor((effects - lo) / width).astype(int)
    nbins = int(idx.max()) + 1
    counts = np.bincount(idx, minlength=nbins)
    sums = np.bincount(idx, weights=effects, minlength=nbins)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    edges = lo + width * np.arange(nbins + 1)
    return Histogram(edges, counts, means)


def most_probable_estimate(a: Ascet, max_y: float, bin_divisor: int = 100) -> float:
    """Mean effect of the most populated histogram bin.

    Ties go to the bin whose mean is closest to the median row effect, taken
    as the upper middle order statistic so it is always an observed effect;
    remaining ties go to the lower bin.
    """
    h = histogram(a, max_y, bin_divisor)
    effects = np.sort(a.effects())
    median = effects[len(effects) // 2]
    best = np.flatnonzero(h.counts == h.counts.max())
    dist = np.abs(h.means[best] - median)
    return float(h.means[best[int(np.argmin(dist))]])


# -- orchestration -----------------------------------------------------------


def run_dice(
    data: Dataset,
    config: DiceConfig | None = None,
    graph: MixedGraph | None = None,
    test=None,
) -> Ascet:
    """Run the full query on ``data`` and return the pruned ASCET.

    ``test`` defaults to a Fisher-z test at ``config.alpha``. With a truth
    ``graph``, estimation is refused when the graph is not amenable to
    (treatment, outcome), and every row records whether its subset satisfies
    the generalised back-door criterion.
    """
    config = config or DiceConfig()
    w, y = data.treatment, data.outcome
    if w is None or y is None:
        raise ValueError("dataset needs treatment and outcome roles")
    timings = {}
    diagnostics: dict = {"timings": timings}

    if graph is not None and not is_amenable(graph, w, y):
        log.warning("truth graph is not adjustment amenable for (%s, %s); refusing to estimate", w, y)
        return Ascet((), (), status=STATUS_NOT_AMENABLE, config=config, diagnostics=diagnostics)

    if test is None:
        test = FisherZTest(data, config.alpha)
    t0 = time.perf_counter()
    sep_w: dict = {}
    sep_y: dict = {}
    pre = set(data.pretreatment)
    adj_w = (local_adjacency(data.columns, w, test, config.max_cond, sep_w) - {y}) & pre
    adj_y = (local_adjacency(data.columns, y, test, config.max_cond, sep_y) - {w}) & pre
    timings["discovery"] = time.perf_counter() - t0
    diagnostics["adj_w"] = [c for c in data.columns if c in adj_w]
    diagnostics["adj_y"] = [c for c in data.columns if c in adj_y]
    diagnostics["ci_tests"] = getattr(test, "calls", None)

    if not adj_w:
        log.warning("%s", NOT_FOUND_MESSAGE)
        return Ascet((), (), status=STATUS_NOT_FOUND, config=config, diagnostics=diagnostics)

    cands = tuple(c for c in data.columns if c in adj_w | adj_y)
    if len(cands) > config.max_candidates:
        raise CandidateCapExceeded(
            f"{len(cands)} candidate adjustment variables exceed max_candidates={config.max_candidates}"
        )

    t0 = time.perf_counter()
    masks = range(1 << len(cands))

    def estimate(mask):
        z = tuple(c for i, c in enumerate(cands) if mask >> i & 1)
        valid = None if graph is None else satisfies_gbc(graph, w, y, z)
        try:
            value = psm_effect(data, w, y, z, config.estimand).value
            return AscetRow(mask, value, None, valid)
        except EstimationError as exc:
            return AscetRow(mask, math.nan, f"{type(exc).__name__}: {exc}", valid)

    if config.n_jobs > 1:
        with ThreadPoolExecutor(config.n_jobs) as pool:
            rows = tuple(pool.map(estimate, masks))
    else:
        rows = tuple(map(estimate, masks))
    timings["estimation"] = time.perf_counter() - t0

    full = Ascet(cands, rows, config=config, diagnostics=diagnostics)
    sens, skipped = sensitivities(full)
    diagnostics["skipped_pairs"] = skipped
    full = replace(full, sensitivities=sens)
    return prune(full, config.tau)


def max_abs_outcome(data: Dataset) -> float:
    return float(np.max(np.abs(data.column(data.outcome))))


def summary_json(a: Ascet, data: Dataset) -> str:
    return json.dumps(a.summary(max_abs_outcome(data)), indent=2, sort_keys=True) + "\n"
