"""Command-line front end: ``qshard {grover,shor,qft-check,selftest}``."""

from __future__ import annotations

import argparse
import os
import sys
import time
from collections.abc import Callable, Sequence

from . import rng as rngs
from .algorithms.grover import GroverConfig, closed_form_success
from .algorithms.shor import (
    ShorConfig,
    ShorRejection,
    analyse_branch,
    check_candidate,
    pick_xguess,
    register1_distribution,
    shor_run,
    shor_state_path,
)
from .checks import SuiteResult, check_qft, run_selftest
from .density import MAX_DENSITY_QUBITS, PARTITIONED, ROOT, entropy, format_eigenvalues
from .multiverse import GroverAlgorithm, MultiverseConfig, ShorAlgorithm, run_multiverse
from .noise import KINDS, MIXED, format_noise_plans, parse_noise_plans
from .statevector import InputError, format_state_dump
from .topology import ConfigurationError, group_layout, log2_exact
from .transport import TransportError, run_spmd

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
TOP_EIGENVALUES = 8

Report = list[tuple[str, str]]


class UsageError(Exception):
    pass


def fmt(x: float, digits: int = 10) -> str:
    """Float for reports; round-off level values print as 0."""
    x = float(x)
    if abs(x) < 1e-12:
        return "0"
    return f"{x:.{digits}g}"


def render(report: Report, style: str) -> str:
    if style == "kv":
        return "".join(f"{k}={v}\n" for k, v in report)
    width = max((len(k) for k, _ in report), default=0)
    return "".join(f"{k:<{width}}  {v}\n" for k, v in report)


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


# argument handling


def _weights(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(w) for w in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"weights must be comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--ranks", type=int, default=1, help="ranks per group (a power of two)")
    common.add_argument("--groups", type=int, default=1, help="number of noise groups (a power of two)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--ientropy", type=int, choices=(0, 1, 2), default=0,
                        help="0: no density matrix, 1: assembled at the root, 2: row blocks on every rank")
    common.add_argument("--noise-count", type=int, default=1, help="noise events per noisy group")
    common.add_argument("--noise-kind", choices=(*KINDS, MIXED), default=KINDS[0])
    common.add_argument("--weights", type=_weights, default=None, help="group weights, comma separated")
    common.add_argument("--transport", choices=("local", "socket"), default="local")
    common.add_argument("--port", type=int, default=None, help="first TCP port for the socket transport")
    common.add_argument("--format", dest="style", choices=("text", "kv"), default="text")
    common.add_argument("--deterministic", action="store_true",
                        help="leave out timings and the rank layout so reports can be compared")
    common.add_argument("--dump-state", metavar="PATH", help="write the final (group 0) state")
    common.add_argument("--noise-plan", metavar="PATH",
                        help="replay the noise plan in PATH, or write the drawn plan there if it does not exist")
    common.add_argument("--dump-eigenvalues", metavar="PATH", help="write every density-matrix eigenvalue")

    parser = argparse.ArgumentParser(prog="qshard", description="Distributed state-vector quantum simulator.")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.commands = {}

    g = sub.add_parser("grover", parents=[common], help="Grover search for one marked item")
    parser.commands["grover"] = g
    g.add_argument("--nq", type=int, required=True)
    g.add_argument("--marked", type=int, required=True)
    g.add_argument("--iterations", type=int, default=None, help="override round(pi/4 sqrt(2^nq))")
    g.add_argument("--hall2", action="store_true", help="use the dense all-qubit Hadamard")

    s = sub.add_parser("shor", parents=[common], help="factor M with Shor's algorithm")
    parser.commands["shor"] = s
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--xguess", type=int, default=None)
    s.add_argument("--sample", action="store_true", help="sample one register-two outcome instead of all")
    s.add_argument("--order", choices=("project-first", "qft-first"), default="project-first")

    for name, help_text in (("qft-check", "QFT against the dense transform"),
                            ("selftest", "all operator checks against dense references")):
        c = parser.commands[name] = sub.add_parser(name, parents=[common], help=help_text)
        c.add_argument("--nq", type=int, default=6)
        c.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return parser


def _validate(args) -> None:
    total = args.ranks * args.groups
    try:
        group_layout(total, args.groups)
        p = log2_exact(args.ranks)
    except ConfigurationError as err:
        raise UsageError(str(err)) from None
    if args.noise_count < 0:
        raise UsageError("--noise-count cannot be negative")
    if args.weights is not None and len(args.weights) != args.groups:
        raise UsageError(f"--weights needs {args.groups} values, got {len(args.weights)}")
    nq = getattr(args, "nq", None)
    if nq is not None:
        if nq < 1:
            raise UsageError("--nq must be positive")
        if p > nq:
            raise UsageError(f"{args.ranks} ranks per group cannot share {nq} qubits")
        if args.ientropy and nq > MAX_DENSITY_QUBITS:
            raise UsageError(f"density matrices are limited to {MAX_DENSITY_QUBITS} qubits")


def _multiverse_config(args, points: Sequence[str], nq: int) -> MultiverseConfig:
    config = MultiverseConfig(args.groups, args.weights, args.seed, args.noise_count, args.noise_kind)
    if args.noise_plan:
        if os.path.exists(args.noise_plan):
            with open(args.noise_plan, encoding="utf-8") as fh:
                plans = parse_noise_plans(fh.read(), args.groups)
            config = MultiverseConfig(args.groups, args.weights, args.seed, args.noise_count,
                                      args.noise_kind, tuple(tuple(p) for p in plans))
        else:
            _write(args.noise_plan, format_noise_plans(config.noise_plans(nq, points)))
    config.noise_plans(nq, points)
    return config


def _density_mode(args) -> str | None:
    return {0: None, 1: ROOT, 2: PARTITIONED}[args.ientropy]


def _density_report(args, density) -> Report:
    eigs = density.eigenvalues()
    out = [
        ("density.mode", _density_mode(args)),
        ("density.trace", fmt(density.trace())),
        ("density.purity", fmt(density.purity())),
        ("density.entropy_bits", fmt(entropy(eigs))),
        ("density.eigenvalues_top", ",".join(fmt(x) for x in eigs[:TOP_EIGENVALUES])),
    ]
    if args.dump_eigenvalues:
        _write(args.dump_eigenvalues, format_eigenvalues(eigs))
    return out


def _noise_report(plans) -> Report:
    out = []
    for g, plan in enumerate(plans):
        for i, ev in enumerate(plan):
            qhit = ",".join(str(q) for q in ev.qhit)
            out.append((f"group.{g}.noise.{i}",
                        f"{ev.kind} qhit={qhit} eloc={ev.eloc} alpha={fmt(ev.alpha)} beta={fmt(ev.beta)}"))
    return out


# subcommands; each returns (worker run on every rank, exit code policy)


def cmd_grover(args) -> tuple[Callable, Callable[[Report], int]]:
    if not 0 <= args.marked < 1 << args.nq:
        raise UsageError(f"--marked must be in 0..{(1 << args.nq) - 1}")
    if args.iterations is not None and args.iterations < 0:
        raise UsageError("--iterations cannot be negative")
    config = GroverConfig(args.nq, args.marked, args.iterations)
    alg = GroverAlgorithm(config, args.hall2)
    mv = _multiverse_config(args, alg.injection_points, args.nq)

    def work(world) -> Report | None:
        res = run_multiverse(alg, mv, world, _density_mode(args))
        if world.rank != 0:
            return None
        report = [
            ("command", "grover"),
            ("nq", str(config.nq)),
            ("marked", str(config.marked)),
            ("iterations", str(config.n_t)),
            ("probability", fmt(abs(res.states[0][config.marked]) ** 2)),
            ("closed_form", fmt(closed_form_success(config.nq, config.n_t))),
        ]
        if mv.group_count > 1:
            report.append(("groups", str(mv.group_count)))
            for g, state in enumerate(res.states):
                report.append((f"group.{g}.weight", fmt(res.weights[g])))
                report.append((f"group.{g}.probability", fmt(abs(state[config.marked]) ** 2)))
            report += _noise_report(res.plans)
        if res.density is not None:
            report += _density_report(args, res.density)
        if args.dump_state:
            _write(args.dump_state, format_state_dump(res.states[0]))
        return report

    return work, lambda report: EXIT_OK


def _resolve_xguess(args) -> int:
    if args.xguess is not None:
        return args.xguess
    return pick_xguess(args.m, rngs.stream(args.seed, rngs.XGUESS))


def _peaks_text(peaks) -> str:
    if not peaks:
        return "none"
    parts = []
    for pk in peaks:
        r = pk.period if pk.period else "-"
        parts.append(f"{pk.nbar}:{fmt(pk.probability, 8)}:r={r}")
    return " ".join(parts)


def _factors_text(factors) -> str:
    return "none" if not factors else ",".join(str(f) for f in sorted(factors))


def cmd_shor(args) -> tuple[Callable, Callable[[Report], int]]:
    try:
        check_candidate(args.m)
        if args.xguess is not None:
            ShorConfig.create(args.m, args.xguess)
    except ShorRejection as err:
        raise UsageError(f"M={err.m} rejected: {err.reason}") from None
    except InputError as err:
        raise UsageError(str(err)) from None
    multiverse = args.groups > 1 or args.ientropy > 0
    if multiverse:
        return _shor_multiverse(args)
    mode = "sample" if args.sample else "enumerate"

    def work(world) -> Report | None:
        out = shor_run(args.m, world, args.seed, args.xguess, mode, args.order)
        report = None
        k = x = 0
        if world.rank == 0:
            report = [
                ("command", "shor"),
                ("m", str(out.m)),
                ("n1", str(out.n1)),
                ("n2", str(out.n2)),
                ("q", str(out.q)),
                ("phi", str(out.phi)),
                ("attempts", ",".join(str(a) for a in out.attempts)),
                ("xguess", str(out.xguess)),
                ("period", str(out.period) if out.period else "none"),
                ("factors", _factors_text(out.factors)),
                ("branches", str(len(out.branches))),
            ]
            for b in out.branches:
                report.append((f"branch.{b.k}", f"prob={fmt(b.probability)} n_k={b.n_k} d={b.d} "
                                                f"peaks={_peaks_text(b.peaks)}"))
            x, k = out.xguess, out.branches[0].k
        if args.dump_state:
            x, k = world.bcast_int(x), world.bcast_int(k)
            shard, _, _ = shor_state_path(ShorConfig.create(args.m, x), world, None, k=k)
            full = shard.gather()
            if full is not None:
                _write(args.dump_state, format_state_dump(full))
        return report

    return work, lambda report: EXIT_OK


def _shor_multiverse(args):
    x = _resolve_xguess(args)
    config = ShorConfig.create(args.m, x)
    alg = ShorAlgorithm(config, args.seed)
    mv = _multiverse_config(args, alg.injection_points, config.nq)

    def work(world) -> Report | None:
        res = run_multiverse(alg, mv, world, _density_mode(args))
        if world.rank != 0:
            return None
        report = [
            ("command", "shor"),
            ("m", str(config.m)),
            ("n1", str(config.n1)),
            ("n2", str(config.n2)),
            ("q", str(config.q)),
            ("xguess", str(config.xguess)),
            ("groups", str(mv.group_count)),
        ]
        factors = None
        for g, state in enumerate(res.states):
            k = int(round(res.summaries[g][0]))
            dist = register1_distribution(state, config.n1, config.n2)
            branch = analyse_branch(config, k, res.summaries[g][1], dist)
            win = next((pk for pk in branch.peaks if pk.factors), None)
            if g == 0 and win:
                factors = win.factors
            report.append((f"group.{g}.weight", fmt(res.weights[g])))
            report.append((f"group.{g}.k", str(k)))
            report.append((f"group.{g}.factors", _factors_text(win.factors if win else None)))
            report.append((f"group.{g}.peaks", _peaks_text(branch.peaks)))
        report.append(("factors", _factors_text(factors)))
        report += _noise_report(res.plans)
        if res.density is not None:
            report += _density_report(args, res.density)
        if args.dump_state:
            _write(args.dump_state, format_state_dump(res.states[0]))
        return report

    return work, lambda report: EXIT_OK


def _suite_report(command: str, results: list[SuiteResult]) -> Report:
    report = [("command", command)]
    for r in results:
        report.append((f"check.{r.name}", f"{'pass' if r.ok else 'FAIL'} {r.passed}/{r.total}"))
    passed = sum(r.passed for r in results)
    total = sum(r.total for r in results)
    report.append(("checks", f"{'pass' if passed == total else 'FAIL'} {passed}/{total}"))
    return report


def _suite_exit(report: Report) -> int:
    return EXIT_OK if dict(report)["checks"].startswith("pass") else EXIT_FAILED


def cmd_qft_check(args):
    def work(world):
        results = check_qft(world, args.nq, args.seed)
        if args.inject_fault:
            results.append(SuiteResult("injected-fault", 0, 1))
        return _suite_report("qft-check", results) if world.rank == 0 else None

    return work, _suite_exit


def cmd_selftest(args):
    def work(world):
        results = run_selftest(world, args.nq, args.seed, fault=args.inject_fault)
        return _suite_report("selftest", results) if world.rank == 0 else None

    return work, _suite_exit


COMMANDS = {
    "grover": cmd_grover,
    "shor": cmd_shor,
    "qft-check": cmd_qft_check,
    "selftest": cmd_selftest,
}


def _single_group(args) -> bool:
    return args.command in ("qft-check", "selftest")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if _single_group(args):
        args.groups = 1
    try:
        _validate(args)
        work, exit_code = COMMANDS[args.command](args)
    except (UsageError, InputError, ConfigurationError) as err:
        parser.commands[args.command].print_usage(sys.stderr)
        print(f"qshard {args.command}: error: {err}", file=sys.stderr)
        return EXIT_USAGE

    total = args.ranks * args.groups
    start = time.perf_counter()
    try:
        results = run_spmd(total, work, transport=args.transport, port=args.port)
    except TransportError as err:
        print(f"qshard {args.command}: run failed: {err}", file=sys.stderr)
        return EXIT_FAILED
    elapsed = time.perf_counter() - start
    report = results[0]
    if not args.deterministic:
        report = report + [("ranks", f"{args.ranks}x{args.groups}"), ("transport", args.transport)]
        if args.style == "text":
            report.append(("elapsed_s", f"{elapsed:.3f}"))
    sys.stdout.write(render(report, args.style))
    return exit_code(results[0])


if __name__ == "__main__":
    sys.exit(main())
