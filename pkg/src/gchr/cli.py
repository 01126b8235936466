"""Command-line front end: ``chr run | check | bench | encode | trace replay``."""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
from pathlib import Path

from . import corpus
from .chre import encode_program, run_ensemble
from .chrmp import run_mp
from .chrt import run_chrt
from .engine_par import ParConfig, run_parallel
from .engine_seq import DEFAULT_FUEL, run
from .errors import CHRError, FragmentError, ParseError
from .oracle import check_serializable, non_joinable
from .parser import parse_program
from .syntax import ENGINES, Program, check_fragment, validate_ground
from .terms import format_constraint, sort_constraints
from .trace import format_trace, parse_trace

EXIT_OK, EXIT_DIAGNOSTICS, EXIT_RUNTIME = 0, 1, 2


def load_program(spec: str, constants: dict | None = None) -> Program:
    """``corpus:<name>`` or a path to program text."""
    if spec.startswith("corpus:"):
        name = spec[len("corpus:"):]
        if not constants:
            return corpus.load(name)
        name = "union_find_basic" if name == "union_find" else name
        if name not in corpus.SOURCES:
            raise ParseError(f"unknown corpus program {name!r}", 1, 1)
        return parse_program(corpus.SOURCES[name], constants)
    return parse_program(Path(spec).read_text(), constants)


def result_hash(constraints) -> str:
    """64-bit digest of the sorted dump, so insensitive to store order."""
    dump = "\n".join(format_constraint(c) for c in sort_constraints(constraints))
    return hashlib.blake2b(dump.encode(), digest_size=8).hexdigest()


def _constants(items) -> dict:
    out = {}
    for item in items or ():
        name, _, value = item.partition("=")
        out[name.strip()] = int(value)
    return out


def _seed(args) -> int | None:
    env = os.environ.get("CHR_SEED")
    return int(env) if env else args.seed


def _positive_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("worker counts must be at least 1")
    return values


def _positive(text: str) -> int:
    return _positive_list(text)[0]


def _domain(text: str) -> list:
    if text.isdigit():
        return list(range(int(text)))
    return [int(x) if x.lstrip("-").isdigit() else x for x in text.split(",")]


def _goal(args, p: Program):
    return corpus.goal_from_spec(args.goal, p)


def cmd_run(args) -> int:
    p = load_program(args.program, _constants(args.const))
    goal = _goal(args, p)
    seed = _seed(args)
    out = sys.stdout
    engine = args.engine
    if engine == "chre":
        schedule = args.schedule
        if schedule == "rand" and seed is not None:
            schedule = f"rand:{seed}"
        protocol = ()
        if args.encode:
            enc = encode_program(p)
            p, protocol = enc.program, enc.protocol
        res = run_ensemble(p, goal, schedule=schedule, fuel=args.fuel, locations=args.locations)
        print(res.dump(protocol if args.hide_protocol else ()), file=out)
        if args.stats:
            everything = [c for s in res.stores.values() for c in s.elements()]
            print(f"steps={res.steps}", file=out)
            print(f"sent={res.sent} flushed={res.flushed}", file=out)
            print(f"hash={result_hash(everything)}", file=out)
        return EXIT_OK
    trace = []
    if engine == "seq":
        res = run(p, goal, goal_order=args.goal_order, fuel=args.fuel)
        final, steps, trace = res.sorted(), res.steps, res.trace
    elif engine == "par":
        cfg = ParConfig(workers=args.workers, goal_order=args.goal_order, fuel=args.fuel, seed=seed)
        res = run_parallel(p, goal, cfg)
        final, steps, trace = res.sorted(), res.steps, res.trace
    elif engine == "mp":
        policy = args.policy
        if policy == "random" and seed is not None:
            policy = f"random:{seed}"
        res = run_mp(p, goal, policy=policy, fuel=args.fuel)
        final, steps = res.sorted(), res.steps
    else:
        res = run_chrt(p, goal, retries=args.retries, fuel=args.fuel, workers=args.workers)
        final, steps = res.sorted(), res.steps
    for c in final:
        print(format_constraint(c), file=out)
    if engine == "chrt":
        for txn in res.transactions:
            print(f"% {txn}", file=out)
    if args.stats:
        print(f"steps={steps}", file=out)
        if engine == "mp":
            print(f"report={res.report}", file=out)
        print(f"hash={result_hash(final)}", file=out)
    if args.trace:
        Path(args.trace).write_text(format_trace(trace))
    return EXIT_OK


def cmd_check(args) -> int:
    p = load_program(args.program, _constants(args.const))
    problems = 0
    for d in validate_ground(p):
        print(d)
        problems += 1
    engine = args.engine or {"chre": "chre", "chrt": "chrt"}.get(p.dialect, "seq")
    for d in check_fragment(p, engine):
        print(f"[{engine}] {d}")
        problems += d.severity == "error"
    if args.confluence:
        name = args.program.removeprefix("corpus:")
        name = "union_find_basic" if name == "union_find" else name
        invariant = corpus.INVARIANTS.get(name) if args.program.startswith("corpus:") else None
        bad = non_joinable(p, _domain(args.domain), invariant=invariant, max_states=args.max_states)
        for cp in bad:
            print(f"non-joinable: {cp}")
        print(f"non-joinable critical pairs: {len(bad)}")
        problems += len(bad)
    if not problems:
        print("ok")
    return EXIT_DIAGNOSTICS if problems else EXIT_OK


def cmd_bench(args) -> int:
    p = load_program(args.program, _constants(args.const))
    goal = list(_goal(args, p))
    print("workers,goal_order,wall_time,result_hash")
    for order in args.goal_order.split(","):
        for workers in args.workers:
            cfg = ParConfig(workers=workers, goal_order=order, fuel=args.fuel, seed=_seed(args))
            best = None
            for _ in range(args.repeat):
                start = time.perf_counter()
                res = run_parallel(p, goal, cfg)
                elapsed = time.perf_counter() - start
                best = elapsed if best is None else min(best, elapsed)
            print(f"{workers},{order},{best:.4f},{result_hash(res.alive.elements())}")
    return EXIT_OK


def cmd_encode(args) -> int:
    p = load_program(args.program, _constants(args.const))
    sys.stdout.write(str(encode_program(p).program))
    return EXIT_OK


def cmd_replay(args) -> int:
    p = load_program(args.program, _constants(args.const))
    goal = list(_goal(args, p))
    trace = parse_trace(Path(args.trace_file).read_text(), p)
    final = None
    if args.final is not None:
        final = corpus.goal_from_spec(args.final, p) if args.final else []
    ok = check_serializable(p, goal, trace, final)
    print(f"{len(trace)} steps: " + ("serializable" if ok else "NOT serializable"))
    return EXIT_OK if ok else EXIT_DIAGNOSTICS


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chr", description="Run and analyse ground CHR programs.")
    sub = ap.add_subparsers(dest="command", required=True)

    def program_args(sp):
        sp.add_argument("program", help="program file or corpus:<name>")
        sp.add_argument("--const", action="append", metavar="NAME=VALUE", help="override a #const")

    r = sub.add_parser("run", help="execute a goal")
    program_args(r)
    r.add_argument("--goal", required=True, help="goal text or gen:<name>:<args>")
    r.add_argument("--engine", choices=ENGINES, default="seq")
    r.add_argument("--workers", type=_positive, default=4)
    r.add_argument("--goal-order", choices=("stack", "queue"), default="stack")
    r.add_argument("--policy", default="exhaustive", help="mp: exhaustive, random or random:<seed>")
    r.add_argument("--schedule", default="rr", help="chre: rr, rand, rand:<seed> or par")
    r.add_argument("--locations", default="auto")
    r.add_argument("--encode", action="store_true", help="chre: compile neighbor rules first")
    r.add_argument("--hide-protocol", action="store_true", help="chre: omit protocol constraints")
    r.add_argument("--retries", type=int, default=16)
    r.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    r.add_argument("--seed", type=int)
    r.add_argument("--stats", action="store_true")
    r.add_argument("--trace", metavar="FILE", help="write the rule applications to FILE")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="validate, fragment and confluence checks")
    program_args(c)
    c.add_argument("--engine", choices=ENGINES, help="fragment to check (default: by dialect)")
    c.add_argument("--confluence", action="store_true")
    c.add_argument("--domain", default="3", help="N for 0..N-1, or a comma-separated list")
    c.add_argument("--max-states", type=int, default=10 ** 4)
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("bench", help="time the parallel engine across worker counts")
    program_args(b)
    b.add_argument("--goal", required=True)
    b.add_argument("--workers", type=_positive_list, default=[1, 2, 4, 8])
    b.add_argument("--goal-order", default="stack", help="stack, queue or both comma-separated")
    b.add_argument("--repeat", type=_positive, default=1)
    b.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    b.add_argument("--seed", type=int)
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("encode", help="print the program with neighbor rules made local")
    program_args(e)
    e.set_defaults(func=cmd_encode)

    t = sub.add_parser("trace", help="trace tools")
    tsub = t.add_subparsers(dest="trace_command", required=True)
    rp = tsub.add_parser("replay", help="check a trace file for serializability")
    program_args(rp)
    rp.add_argument("trace_file")
    rp.add_argument("--goal", required=True)
    rp.add_argument("--final", help="expected final state")
    rp.set_defaults(func=cmd_replay)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "goal_order", None) and args.command == "bench":
        for order in args.goal_order.split(","):
            if order not in ("stack", "queue"):
                print(f"chr: goal order must be stack or queue, not {order!r}", file=sys.stderr)
                return EXIT_RUNTIME
    try:
        return args.func(args)
    except FragmentError as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
        return EXIT_DIAGNOSTICS
    except (ParseError, FileNotFoundError, KeyError) as exc:
        print(f"chr: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    except (CHRError, ValueError) as exc:
        print(f"chr: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
