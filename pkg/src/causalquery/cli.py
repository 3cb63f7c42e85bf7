"""Command-line front end: ``query``, ``generate`` and ``bench``.

Exit status is 0 on success, 2 when no adjustment set could be found, and
1 on any other error (bad flags included).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

from . import __version__
from .ci_test import Dataset, FisherZTest
from .criteria import CandidateCapExceeded, adjacency_union
from .dice import (
    MAX_CANDIDATES_LIMIT,
    STATUS_NOT_AMENABLE,
    STATUS_NOT_FOUND,
    DiceConfig,
    histogram,
    max_abs_outcome,
    run_dice,
)
from .local_learn import DEFAULT_MAX_COND, find_candidates
from .mixed_graph import MixedGraph
from .synth import generate, load_spec, score_discovery

log = logging.getLogger("causalquery")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_FOUND = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for "not found"
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _snapshot(args, extra=None) -> dict:
    flags = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    out = {"command": args.command, "flags": flags, "version": __version__}
    out.update(extra or {})
    return out


def _write_all(out: Path, files: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)


# -- query ---------------------------------------------------------------------


def cmd_query(args) -> int:
    pre = None
    if args.pretreatment:
        pre = [c.strip() for c in args.pretreatment.split(",") if c.strip()]
    data = Dataset.from_csv(args.input, args.treatment, args.outcome, pre)
    graph = None
    if args.graph:
        graph = MixedGraph.from_text(Path(args.graph).read_text())
    config = DiceConfig(
        alpha=args.alpha, tau=args.tau, max_cond=args.max_cond, estimand=args.estimand,
        max_candidates=args.max_candidates, n_jobs=args.jobs,
    )
    log.info("query on %s: n=%d, p=%d", args.input, data.n, data.p)
    try:
        ascet = run_dice(data, config, graph=graph)
    except CandidateCapExceeded as exc:
        raise CandidateCapExceeded(
            f"{exc}; raise --max-candidates (at most {MAX_CANDIDATES_LIMIT}), lower --alpha, "
            "or restrict --pretreatment"
        ) from None

    snapshot = _snapshot(args, {"input_sha256": _sha256(args.input), "n": data.n, "p": data.p})
    max_y = max_abs_outcome(data)
    summary = ascet.summary(max_y if max_y > 0 else None)
    summary["run"] = snapshot
    summary["treatment"], summary["outcome"] = data.treatment, data.outcome

    files = {}
    if len(ascet.effects()):
        if max_y <= 0:
            raise ValueError(f"outcome {data.outcome!r} is identically zero; histogram bins are undefined")
        files["ascet.csv"] = ascet.to_csv()
        files["histogram.csv"] = histogram(ascet, max_y, config.bin_divisor).to_csv()
    else:
        files["ascet.csv"] = ""
        files["histogram.csv"] = "bin,left,right,count,mean\n"
    files["summary.json"] = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    _write_all(Path(args.out), files)

    if ascet.status == STATUS_NOT_FOUND:
        print(summary["message"], file=sys.stderr)
        return EXIT_NOT_FOUND
    if ascet.status == STATUS_NOT_AMENABLE:
        print(f"error: the graph in {args.graph} is not adjustment amenable for "
              f"({data.treatment}, {data.outcome}); no estimate reported", file=sys.stderr)
        return EXIT_ERROR
    if not len(ascet.effects()):
        print("error: every adjustment subset failed to estimate; see summary.json", file=sys.stderr)
        return EXIT_ERROR
    print(f"most probable estimate: {summary['most_probable_estimate']!r} "
          f"({len(ascet.rows)} rows over {list(ascet.candidates)})")
    return EXIT_OK


# -- generate --------------------------------------------------------------------


def cmd_generate(args) -> int:
    if args.n < 1:
        raise ValueError(f"--n must be at least 1, got {args.n}")
    spec = load_spec(args.spec)
    if args.distractors is not None:
        if args.distractors < 0:
            raise ValueError("--distractors must be non-negative")
        spec = replace(spec, distractors=args.distractors)
    data, truth, effect = generate(spec, args.n, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    base = out.with_suffix("")
    mag_path = base.with_name(base.name + ".mag")
    truth_path = base.with_name(base.name + ".truth.json")
    sidecar = {
        "true_effect": effect,
        "treatment": data.treatment,
        "outcome": data.outcome,
        "pretreatment": list(data.pretreatment),
        "mag": mag_path.name,
        "run": _snapshot(args, {"spec_sha256": _sha256(args.spec)}),
    }
    out.write_text(data.to_csv())
    mag_path.write_text(truth.to_text())
    truth_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out} ({data.n} rows, {data.p} columns), true effect {effect!r}")
    return EXIT_OK


# -- bench -----------------------------------------------------------------------

BENCH_FIELDS = ["n", "distractors", "reps", "precision", "recall", "f_score",
                "generate_s", "discovery_s", "estimation_s"]


def bench_cell(spec, n: int, distractors: int, reps: int, seed: int, alpha: float, max_cond: int,
               estimate: bool = False) -> dict:
    spec = replace(spec, distractors=distractors)
    totals = dict.fromkeys(["precision", "recall", "f_score", "generate_s", "discovery_s", "estimation_s"], 0.0)
    for r in range(reps):
        t0 = time.perf_counter()
        data, truth, _ = generate(spec, n, seed + r)
        t1 = time.perf_counter()
        w, y = data.treatment, data.outcome
        target = adjacency_union(truth, w, y) & set(data.pretreatment)
        found = find_candidates(data.columns, w, y, FisherZTest(data, alpha), max_cond, data.pretreatment)
        t2 = time.perf_counter()
        if estimate:
            run_dice(data, DiceConfig(alpha=alpha, max_cond=max_cond))
        t3 = time.perf_counter()
        score = score_discovery(found, target)
        for k, v in asdict(score).items():
            totals[k] += v
        totals["generate_s"] += t1 - t0
        totals["discovery_s"] += t2 - t1
        totals["estimation_s"] += t3 - t2
    row = {"n": n, "distractors": distractors, "reps": reps}
    row.update({k: v / reps for k, v in totals.items()})
    if not estimate:
        row["estimation_s"] = ""
    return row


def cmd_bench(args) -> int:
    if args.reps < 1:
        raise ValueError("--reps must be at least 1")
    spec = load_spec(args.spec)
    rows = []
    for k in args.distractors:
        for n in args.n:
            log.info("bench cell n=%d distractors=%d", n, k)
            rows.append(bench_cell(spec, n, k, args.reps, args.seed, args.alpha, args.max_cond, args.estimate))
    buf = io.StringIO()
    w = csv.DictWriter(buf, BENCH_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    # reported only: timing noise makes this unfit for an assertion
    for k in args.distractors:
        times = [r["discovery_s"] for r in rows if r["distractors"] == k]
        monotone = all(a <= b for a, b in zip(times, times[1:]))
        print(f"distractors={k}: discovery time monotone in n: {'yes' if monotone else 'no'}", file=sys.stderr)
    return EXIT_OK


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="causalquery", description="Local causal effect queries from observational data.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("query", help="estimate the effect of a binary treatment on an outcome")
    q.add_argument("input", help="CSV file with a header row")
    q.add_argument("--treatment", required=True)
    q.add_argument("--outcome", required=True)
    q.add_argument("--pretreatment", help="comma-separated pretreatment columns (default: all others)")
    q.add_argument("--alpha", type=float, default=0.05, help="CI test significance level")
    q.add_argument("--tau", type=float, default=0.1, help="sensitivity pruning threshold")
    q.add_argument("--estimand", choices=["ate", "att"], default="ate")
    q.add_argument("--max-cond", type=int, default=DEFAULT_MAX_COND)
    q.add_argument("--max-candidates", type=int, default=16)
    q.add_argument("--graph", help="truth MAG text file for amenability and validity checks")
    q.add_argument("--out", default="out", help="output directory")
    q.add_argument("--seed", type=int, default=0, help="recorded in the run snapshot")
    q.add_argument("--jobs", type=int, default=1, help="threads for per-subset estimation")
    q.set_defaults(func=cmd_query)

    g = sub.add_parser("generate", help="sample a dataset from a SEM spec file")
    g.add_argument("spec")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--distractors", type=int, help="override the spec's distractor count")
    g.add_argument("--out", required=True, help="CSV path; sidecars are written next to it")
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("bench", help="discovery quality and timing over a grid")
    b.add_argument("spec")
    b.add_argument("--reps", type=int, default=10)
    b.add_argument("--n", type=int, nargs="+", default=[5000])
    b.add_argument("--distractors", type=int, nargs="+", default=[0])
    b.add_argument("--seed", type=int, default=0, help="first seed; rep r uses seed + r")
    b.add_argument("--alpha", type=float, default=0.05)
    b.add_argument("--max-cond", type=int, default=DEFAULT_MAX_COND)
    b.add_argument("--estimate", action="store_true", help="also time the full query per rep")
    b.add_argument("--out", help="report CSV path (default: stdout)")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_ERROR
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
