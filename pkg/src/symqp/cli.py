"""Command-line front end.

    symqp solve MODEL [--ground] [--inner direct|cg] [--opt key=val ...] [-o OUT]
    symqp stats MODEL
    symqp gen-mdp [--family factory|chain] [...] [-o OUT]
    symqp gen-bpdn --n N --m M --k K [...] [-o OUT]
    symqp bench FAMILY [-o OUT]

MODEL is a model source file or a BPDN instance written by ``gen-bpdn``.
Usage errors exit with status 2, solver failures with 3.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__

EXIT_USAGE = 2
EXIT_SOLVER = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_model(path: str):
    """``("foqp", Foqp)`` or ``("bpdn", BpdnInstance)``."""
    from .apps.bpdn import BpdnError, BpdnInstance
    from .lang import FoqpSyntaxError, QuantifierError, parse

    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such model file: {path}")
    text = p.read_text()
    if text.lstrip().startswith("{"):
        try:
            return "bpdn", BpdnInstance.from_json(text)
        except (BpdnError, ValueError, KeyError) as e:
            raise UsageError(f"{path}: {e}") from e
    try:
        return "foqp", parse(text)
    except (FoqpSyntaxError, QuantifierError) as e:
        raise UsageError(f"{path}: {e}") from e


def _compile(prog):
    from .lang import CompileError, compile, propositionalize
    from .lang.syntax import is_propositional

    try:
        if not is_propositional(prog):
            prog = propositionalize(prog)
        return compile(prog)
    except (CompileError, ValueError) as e:
        raise UsageError(f"cannot compile model: {e}") from e


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# subcommands


def cmd_solve(args) -> int:
    from .ipm import IpmError, SolveOptions

    kind, model = _read_model(args.model)
    try:
        opts = SolveOptions.from_pairs(args.opt)
    except (ValueError, TypeError) as e:
        raise UsageError(str(e)) from e
    try:
        if kind == "bpdn":
            from .apps.bpdn import ground_bpdn, solve_bpdn

            if not any(o.split("=")[0].strip() == "precond_k" for o in args.opt):
                opts.precond_k = 1
            report = ground_bpdn(model, opts) if args.ground else solve_bpdn(model, opts)
        else:
            t0 = time.perf_counter()
            qp = _compile(model)
            t_compile = time.perf_counter() - t0
            if args.ground:
                from .baseline import solve_ground

                report = solve_ground(qp, opts, inner=args.inner)
            else:
                from .ipm import ipm_solve

                report = ipm_solve(qp, opts)
                report.time_compile = t_compile
    except IpmError as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER
    lines = [report.to_text(), "solution:\n"]
    lines += [f"{i}\t{float(v)!r}\n" for i, v in enumerate(np.asarray(report.x, dtype=float))]
    _emit("".join(lines), args.output)
    if not report.converged:
        print(f"solver failure: status {report.status}", file=sys.stderr)
        return EXIT_SOLVER
    return 0


def stats_row(path: str):
    """The statistics row for one model file (a :class:`BenchRow`)."""
    from .apps.bench import BenchRow

    kind, model = _read_model(path)
    name = Path(path).stem
    if kind == "bpdn":
        from .apps.bpdn import bpdn_problem

        t0 = time.perf_counter()
        prob = bpdn_problem(model)
        t_sym = time.perf_counter() - t0
        return BenchRow(name, 2 * model.n, 0, model.m * model.n, prob.Q.node_count(), t_sym, 0.0)
    from .baseline import ground_qp
    from .linalg import nnz

    t0 = time.perf_counter()
    qp = _compile(model)
    t_sym = time.perf_counter() - t0
    t0 = time.perf_counter()
    ground_qp(qp)
    t_ground = time.perf_counter() - t0
    s = qp.summary()
    return BenchRow(name, s["active_cols"], s["active_rows"], nnz(qp.A), s["nodes"]["total"], t_sym, t_ground)


def cmd_stats(args) -> int:
    from .apps.bench import format_table

    _emit(format_table([stats_row(args.model)]), args.output)
    return 0


def cmd_gen_mdp(args) -> int:
    from .apps.mdp import MdpError, chain_mdp, factory_mdp, gen_mdp_lp
    from .lang import to_source

    try:
        if args.family == "factory":
            mdp = factory_mdp(args.objects, args.features, args.tools, args.gamma, args.seed)
        else:
            mdp = chain_mdp(args.bits, args.p, args.gamma)
    except MdpError as e:
        raise UsageError(str(e)) from e
    header = f"# {mdp.name}: {len(mdp.bit_names)} state bits, {len(mdp.actions)} actions, gamma {mdp.gamma}\n"
    _emit(header + to_source(gen_mdp_lp(mdp)), args.output)
    return 0


def cmd_gen_bpdn(args) -> int:
    from .apps.bpdn import BpdnError, gen_bpdn

    try:
        inst = gen_bpdn(args.n, args.m, args.k, args.tau, args.seed, args.selection, args.noise)
    except BpdnError as e:
        raise UsageError(str(e)) from e
    _emit(inst.to_json() + "\n", args.output)
    return 0


def cmd_bench(args) -> int:
    from .apps.bench import FAMILIES, format_table

    if args.family not in FAMILIES:
        raise UsageError(f"unknown family {args.family!r}; choose from {', '.join(FAMILIES)}")
    kwargs = {"steps": args.steps} if args.family == "block" and args.steps else {}
    _emit(format_table(FAMILIES[args.family](**kwargs)), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="symqp", description="Symbolic interior-point solver for logical quadratic programs.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("solve", help="compile and solve a model")
    p.add_argument("model")
    p.add_argument("--ground", action="store_true", help="solve the ground form with sparse linear algebra")
    p.add_argument("--inner", choices=("direct", "cg"), default="direct", help="inner solver of the ground route")
    p.add_argument("--opt", action="append", default=[], metavar="KEY=VAL", help="solver option, repeatable")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("stats", help="compile only and print problem statistics")
    p.add_argument("model")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gen-mdp", help="write a factored MDP value LP")
    p.add_argument("--family", choices=("factory", "chain"), default="factory")
    p.add_argument("--objects", type=int, default=2)
    p.add_argument("--features", type=int, default=3)
    p.add_argument("--tools", type=int, default=1)
    p.add_argument("--bits", type=int, default=2, help="chain length")
    p.add_argument("--p", type=float, default=0.8, help="chain success probability")
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen_mdp)

    p = sub.add_parser("gen-bpdn", help="write a Walsh compressed-sensing instance")
    p.add_argument("--n", type=int, default=4096)
    p.add_argument("--m", type=int, default=1024)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--selection", choices=("random", "leading"), default="random")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen_bpdn)

    p = sub.add_parser("bench", help="run a scaling experiment and print a table")
    p.add_argument("family", help="block or mdp")
    p.add_argument("--steps", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if args.command is None:
            raise UsageError("missing command")
        return args.func(args)
    except UsageError as e:
        print(f"symqp: error: {e}", file=sys.stderr)
        ap.print_usage(sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"symqp: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
