"""diam2le command line: gen, run, verify.

Exit status: 0 on success, 1 when a hard invariant or a verified bound
fails, 2 on bad input (unknown family/protocol, unreadable files, ...).
"""
from __future__ import annotations

import argparse
import sys
from collections import Counter
from pathlib import Path

from . import portgraph as pg
from .experiment import ExperimentSpec, build_graph, format_summary, read_summary, run_experiment, verify_rows


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def cmd_gen(args: argparse.Namespace) -> int:
    inst = build_graph(args.graph, args.seed)
    g = inst.graph
    if args.out:
        pg.save(args.out, g, inst.annotation)
    degs = Counter(g.degrees)
    diam = pg.diameter(g)
    print(f"graph {inst.label}: n={g.n} m={g.m} diameter={diam}")
    print("degrees " + " ".join(f"{d}x{c}" for d, c in sorted(degs.items())))
    if inst.annotation is not None:
        print(f"bridges {len(inst.annotation.bridges)}")
    if args.out:
        print(f"wrote {args.out}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    spec = ExperimentSpec(
        graph=args.graph,
        protocol=args.protocol,
        trials=args.trials,
        seed=args.seed,
        congest=args.congest,
        graph_count=args.graph_count,
        out=args.out,
        traces=args.traces,
    )
    result = run_experiment(spec)
    text = format_summary(result.rows)
    if spec.out:
        Path(spec.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    for p in result.problems[:20]:
        print(f"violation: {p}", file=sys.stderr)
    if len(result.problems) > 20:
        print(f"... {len(result.problems) - 20} more violations", file=sys.stderr)
    return 0 if result.ok else 1


def cmd_verify(args: argparse.Namespace) -> int:
    rows = []
    for path in args.summaries:
        rows.extend(read_summary(Path(path).read_text(encoding="utf-8")))
    checks = verify_rows(rows)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="diam2le", description="Leader election experiments on diameter-two networks.")
    sub = ap.add_subparsers(dest="verb", required=True)

    gen = sub.add_parser("gen", help="generate a graph and write it to a file")
    gen.add_argument("--graph", required=True, help="family:params, e.g. lb:n=12 or random:n=50,p=0.3")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", help="graph file to write")
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="run seeded trials and write a CSV summary")
    run.add_argument("--graph", required=True, help="graph file or family:params")
    run.add_argument("--protocol", default="rand-local", help="rand-local, rand-known-n, det or reduce+<key>")
    run.add_argument("--trials", type=int, default=100)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--congest", type=_on_off, default=True, metavar="{on,off}")
    run.add_argument("--graph-count", type=int, default=1, help="independent instances of a generated family")
    run.add_argument("--out", help="summary CSV (default: stdout)")
    run.add_argument("--traces", help="write per-round JSON lines for every trial here")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="check summary CSVs against the analytic bounds")
    ver.add_argument("summaries", nargs="+", help="summary CSV files")
    ver.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, pg.GenerationError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
