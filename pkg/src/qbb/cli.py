"""Command line entry point: ``qbb solve | gen | bench | report``.

Exit codes: 0 success, 2 usage error, 3 I/O or oracle protocol error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from . import __version__
from .bench import (
    default_matrix,
    filter_instances,
    load_instances,
    load_matrix,
    read_records,
    report,
    run_matrix,
)
from .engine import Branching, NodeSelection, SolverConfig, solve
from .instances import FormatError, gen_random, gen_xorsat, load_model, save_model
from .oracles import CapacityExceeded, OracleConfig, OracleError, run_oracle, top_k

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3

log = logging.getLogger("qbb")


class UsageError(Exception):
    pass


def _oracle_cfg(spec: str, args) -> OracleConfig:
    try:
        return OracleConfig.parse(spec, seed=args.seed, num_reads=args.num_reads, budget=args.budget,
                                  capacity=args.oracle_capacity, timeout=args.oracle_timeout)
    except ValueError as exc:
        raise UsageError(f"bad oracle {spec!r}: {exc}") from None


def cmd_solve(args) -> int:
    model = load_model(args.file)
    pools = {}
    for role, spec in (("mip_start", args.mip_start_oracle), ("callback", args.callback_pool)):
        if not spec:
            continue
        try:
            pool = run_oracle(model, _oracle_cfg(spec, args))
        except CapacityExceeded as exc:
            # an oversized model is solved without injection, as with a QPU that cannot embed it
            print(f"qbb: warning: {role} oracle skipped: {exc}", file=sys.stderr)
            continue
        pools[role] = top_k(pool, args.top_k) if args.top_k else pool
    mip_start, callback = pools.get("mip_start"), pools.get("callback")
    cfg = SolverConfig(
        time_limit=args.time_limit,
        node_selection=args.node_selection,
        branching=args.branching,
        mip_start=mip_start,
        callback_pool=callback,
        node_limit=args.node_limit,
    )
    res = solve(model, cfg)
    bits = "".join(str(int(b)) for b in res.best_assignment)
    out = {
        "status": res.status.value,
        "best_value": res.best_value,
        "nodes_explored": res.nodes_explored,
        "wall_time": res.wall_time,
        "root_bound": res.root_bound,
        "injected_accepted": res.injection_stats.accepted,
        "injected_rejected": res.injection_stats.rejected,
        "assignment": bits,
    }
    if args.json:
        print(json.dumps(out))
    else:
        for key, value in out.items():
            print(f"{key}: {value}")
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.family == "xorsat":
        try:
            inst = gen_xorsat(args.n, args.k, args.r, args.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        comments = [f"xorsat n_core={args.n} k={args.k} r={args.r} seed={args.seed}"]
        save_model(inst.model, args.output, comments, planted=inst.planted)
        print(f"wrote {args.output}: {inst.model.n} variables, {inst.model.num_terms} terms")
    else:
        try:
            model = gen_random(args.n, args.density, args.coef_range, args.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        comments = [f"random n={args.n} density={args.density} coef_range={args.coef_range} seed={args.seed}"]
        save_model(model, args.output, comments)
        print(f"wrote {args.output}: {model.n} variables, {model.num_terms} terms")
    return EXIT_OK


def cmd_bench(args) -> int:
    instances = load_instances(args.instances, args.pattern)
    try:
        strategies = load_matrix(args.matrix) if args.matrix else default_matrix()
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad matrix: {exc}") from None
    if args.only:
        wanted = set(args.only)
        strategies = [s for s in strategies if s.name in wanted]
        if not strategies:
            raise UsageError("--only matched no strategy")
    records = run_matrix(instances, strategies, args.time_limit, args.seeds, args.node_limit,
                         args.output, args.jobs)
    failed = sum(r.status == "Failed" for r in records)
    print(f"{len(records)} records in {args.output} ({failed} failed)")
    return EXIT_OK


def cmd_report(args) -> int:
    records = read_records(args.records)
    if not records:
        raise OSError(f"no records in {args.records}")
    ids = None
    if args.filter_threshold is not None:
        ids = filter_instances(records, args.filter_threshold, args.baseline)
        if not ids:
            print("no instance passes the filter", file=sys.stderr)
            return EXIT_OK
    try:
        sys.stdout.write(report(records, args.baseline, args.format, ids))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return EXIT_OK


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0 or math.isnan(v):
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qbb", description="Exact QUBO branch-and-bound with heuristic warm starts.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one triplet file to optimality")
    s.add_argument("file")
    s.add_argument("--branching", choices=[b.value for b in Branching], default=Branching.DEGREE_PRIORITY.value)
    s.add_argument("--node-selection", choices=[x.value for x in NodeSelection],
                   default=NodeSelection.BEST_BOUND.value)
    s.add_argument("--time-limit", type=_positive_float, default=math.inf)
    s.add_argument("--node-limit", type=_positive_int, default=None)
    s.add_argument("--mip-start-oracle", metavar="ORACLE", help="sa, tabu, greedy or external:<cmd>")
    s.add_argument("--top-k", type=_positive_int, default=None)
    s.add_argument("--callback-pool", nargs="?", const="sa", default=None, metavar="ORACLE",
                   help="inject pool entries at internal nodes (oracle defaults to sa)")
    s.add_argument("--oracle-capacity", type=_positive_int, default=None)
    s.add_argument("--oracle-timeout", type=_positive_float, default=60.0)
    s.add_argument("--num-reads", type=_positive_int, default=100)
    s.add_argument("--budget", type=_positive_int, default=100, help="sweeps (sa) or iterations (tabu)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--json", action="store_true", help="print one JSON object")
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("gen", help="generate an instance file")
    gsub = g.add_subparsers(dest="family", required=True)
    gx = gsub.add_parser("xorsat", help="planted regular XORSAT")
    gx.add_argument("--n", type=int, default=16, help="core variables")
    gx.add_argument("--k", type=int, default=3)
    gx.add_argument("--r", type=int, default=3)
    gx.add_argument("--seed", type=int, default=0)
    gx.add_argument("-o", "--output", required=True)
    gr = gsub.add_parser("random", help="random integer QUBO")
    gr.add_argument("--n", type=int, required=True)
    gr.add_argument("--density", type=float, default=0.5)
    gr.add_argument("--coef-range", type=int, default=10)
    gr.add_argument("--seed", type=int, default=0)
    gr.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="run a strategy x instance matrix")
    b.add_argument("--instances", required=True, help="directory of triplet files")
    b.add_argument("--pattern", default="*.qubo")
    b.add_argument("--matrix", help="JSON strategy list (default: built-in matrix)")
    b.add_argument("--only", nargs="+", metavar="NAME", help="run only these strategies")
    b.add_argument("--time-limit", type=_positive_float, default=30.0)
    b.add_argument("--node-limit", type=_positive_int, default=None)
    b.add_argument("--seeds", type=int, nargs="+", default=[0])
    b.add_argument("--jobs", type=_positive_int, default=1)
    b.add_argument("-o", "--output", required=True, help="record log (appended, resumable)")
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="SGM10 table from a record log")
    r.add_argument("records")
    r.add_argument("--baseline", default="Baseline")
    r.add_argument("--format", choices=["md", "csv", "text"], default="md")
    r.add_argument("--filter-threshold", type=float, default=None, metavar="S",
                   help="keep instances whose baseline needs more than S seconds and some strategy solves")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"qbb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, FormatError, OracleError) as exc:
        print(f"qbb: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
