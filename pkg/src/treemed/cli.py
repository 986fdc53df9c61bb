"""Command line: generate data, inspect or run queries, run experiments.

    treemed gen --scale 1 --seed 1 --out data/
    treemed query --config data/ --emit-plan query.xq
    treemed bench --experiment overhead --sweep 1,10,100,1000 --report overhead.tsv
"""

from __future__ import annotations

import argparse
import sys
import tempfile

from .errors import MediatorError


def _read_query(name) -> str:
    if name == "-":
        return sys.stdin.read()
    with open(name, encoding="utf-8") as fh:
        return fh.read()


def _sweep(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad sweep {text!r}; expected e.g. 1,10,100") from None
    if not values or min(values) < 0:
        raise argparse.ArgumentTypeError("sweep needs non-negative integers")
    return values


def cmd_gen(args):
    from .bench.dataset import DatasetSpec, write_dataset

    spec = DatasetSpec(scale=args.scale, seed=args.seed, iron_fraction=args.iron)
    write_dataset(spec, args.out)
    print(f"dataset written to {args.out}")
    return 0


def cmd_query(args):
    from .bench.topology import build_topology
    from .decomposer import binding_table
    from .frontend import canonical_text, canonize, normalize, parse

    text = _read_query(args.file)
    if args.emit_canonical and not args.config:
        # canonization needs no catalog
        sys.stdout.write(canonical_text(canonize(normalize(parse(text)))))
        return 0
    if not args.config:
        print("error: --config is required for this mode", file=sys.stderr)
        return 2
    mediator = build_topology(args.config)[args.topology]
    if args.run:
        result = mediator.execute_query(text)
        for doc in result.documents():
            print(doc)
        for w in result.warnings:
            print(f"warning: {w}", file=sys.stderr)
        return 0
    c = mediator.compile(text)
    if args.emit_canonical:
        sys.stdout.write(canonical_text(c.canonical))
    elif args.emit_atomic:
        for a in c.atomics:
            print(a.text())
        print(c.global_query.text())
        for aid, sources in binding_table(c.bound):
            print(f"{aid}\t{','.join(sources)}")
    else:
        plan = c.unoptimized if args.unoptimized else c.plan
        print(plan.serialize())
    for w in c.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def cmd_bench(args):
    from .bench.dataset import DatasetSpec, write_dataset
    from .bench.experiments import run_experiment
    from .bench.topology import build_topology

    with tempfile.TemporaryDirectory() as tmp:
        data = args.config
        if data is None:
            data = tmp
            write_dataset(DatasetSpec(scale=args.scale, seed=args.seed), data)
        topology = build_topology(data, delay=args.delay)
        report = run_experiment(args.experiment, args.sweep, topology, reps=args.reps)
    report.write(args.report)
    if args.series:
        report.write_series(args.series)
    for top in report.topologies():
        cells = [f"N={n}:{report.value(top, n, 'total'):.2f}ms" for n in report.sweep()]
        print(f"{top}\t" + "  ".join(cells))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="treemed", description="Federated query mediator over tree-tuple relations.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write the synthetic dataset")
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--iron", type=float, default=0.2, help="fraction of nation comments containing 'iron'")
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen)

    q = sub.add_parser("query", help="compile or run a query against a generated dataset")
    q.add_argument("--config", help="dataset directory written by gen")
    q.add_argument("--topology", default="M0", choices=("M0", "M1", "M2", "M3", "M4"))
    mode = q.add_mutually_exclusive_group(required=True)
    mode.add_argument("--emit-canonical", action="store_true")
    mode.add_argument("--emit-atomic", action="store_true", help="atomic queries, global query, source bindings")
    mode.add_argument("--emit-plan", action="store_true")
    mode.add_argument("--run", action="store_true")
    q.add_argument("--unoptimized", action="store_true", help="with --emit-plan, skip the optimizer")
    q.add_argument("file", help="query file, or - for stdin")
    q.set_defaults(fn=cmd_query)

    b = sub.add_parser("bench", help="run an experiment and write a report")
    b.add_argument("--experiment", required=True, choices=("overhead", "phases", "xjoin"))
    b.add_argument("--sweep", type=_sweep, default=[1, 10, 100, 1000])
    b.add_argument("--report", required=True)
    b.add_argument("--series", help="also write a wide per-N table of total time")
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--config", help="existing dataset directory; default generates one")
    b.add_argument("--scale", type=float, default=1.0)
    b.add_argument("--seed", type=int, default=1)
    b.add_argument("--delay", type=float, default=0.0, help="seconds slept per source document")
    b.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except MediatorError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
