"""Command-line entry point: ``capmatch {solve,opt,ratio,audit,payments,experiment}``.

Reports go to stdout as JSON (CSV for payments and ``audit --csv``); logs and
traces go to stderr.  Exit codes: 0 ok, 1 violation found, 2 usage/parse
error, 3 oracle guard exceeded.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path

from .core import PositionAuctionInstance, as_rational, realized
from .experiment import FAMILIES, ExperimentConfig, run_experiment, summarize
from .instances import CATALOG, InstanceFormatError, ParameterError, digest, loads, paper_instance
from .mechanisms import (
    g_vmax,
    greedy_by_density,
    greedy_by_value,
    max_greedy,
    mechanism1,
    mechanism2,
    mechanism3,
    mechanism4,
)
from .oracle import (
    MAX_ORACLE_AGENTS,
    MAX_ORACLE_POSITIONS,
    RATIO_RULES,
    OracleGuardError,
    ZeroWelfareError,
    monotonicity_audit,
    optimal_matching,
    position_optimum,
    ratio_report,
)
from .payments import NonMonotoneError, payments_csv

log = logging.getLogger("capmatch")

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_GUARD = 0, 1, 2, 3

MECHANISMS = (
    "greedy-density",
    "greedy-value",
    "max-greedy",
    "gvmax",
    "mech1",
    "mech3",
    "mech3-relaxed",
    "mech2",
    "mech4",
)
RANDOMIZED = ("mech2", "mech4")
AUDITABLE = ("mech1", "mech3", "mech3-relaxed", "gvmax")

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the splitmix64 generator (returns the output for state ``x``)."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def coin_from_seed(seed: int) -> int:
    return splitmix64(seed) >> 63


def draw_from_seed(seed: int) -> Fraction:
    return Fraction(splitmix64(seed), 1 << 64)


def decimal6(x: Fraction) -> str:
    """6-significant-digit rendering computed from the exact rational."""
    with localcontext() as ctx:
        ctx.prec = 6
        d = Decimal(x.numerator) / Decimal(x.denominator)
    return format(d, "f") if abs(d.adjusted()) < 12 else str(d)


class UsageError(Exception):
    pass


# -- argument handling ------------------------------------------------------------


def _split_params(argv: list[str], known: set[str]) -> tuple[list[str], dict]:
    """Pull ``--<param> <value>`` pairs whose flag the parser does not know out of ``argv``.

    ``--k 50 --V 10`` -> {"k": "50", "V": "10"}.
    """
    rest, params = [], {}
    idx = 0
    while idx < len(argv):
        tok = argv[idx]
        flag = tok.split("=", 1)[0]
        if tok.startswith("--") and len(flag) > 2 and flag not in known:
            if "=" in tok:
                val = tok.split("=", 1)[1]
            elif idx + 1 < len(argv):
                idx += 1
                val = argv[idx]
            else:
                raise UsageError(f"missing value for {tok}")
            params[flag[2:].replace("-", "_")] = val
        else:
            rest.append(tok)
        idx += 1
    return rest, params


def _coerce(val: str):
    if val.lower() in ("true", "false"):
        return val.lower() == "true"
    try:
        return as_rational(val)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a rational: {val!r}") from None


def _load_instance(args):
    if args.instance and args.family:
        raise UsageError("give either --instance or --family, not both")
    if args.instance:
        try:
            text = Path(args.instance).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {args.instance}: {exc.strerror}") from None
        return loads(text)
    if args.family:
        if args.family not in CATALOG:
            raise UsageError(f"unknown family {args.family!r}; known: {', '.join(CATALOG)}")
        params = {k: _coerce(v) for k, v in args.params.items()}
        return paper_instance(args.family, **params)
    raise UsageError("an instance is required (--instance <path> or --family <name>)")


def _general(instance):
    return realized(instance) if isinstance(instance, PositionAuctionInstance) else instance


def _require_position(instance, command: str) -> PositionAuctionInstance:
    if not isinstance(instance, PositionAuctionInstance):
        raise UsageError(f"{command} needs a position-auction instance")
    return instance


def _matching_json(m) -> dict:
    return {
        "pairs": [list(p) for p in sorted(m.pairs)],
        "welfare": str(m.welfare),
        "welfare_decimal": decimal6(m.welfare),
    }


def _base_report(args, instance) -> dict:
    return {"command": args.echo, "instance_digest": digest(instance)}


# -- commands ----------------------------------------------------------------------


def cmd_solve(args) -> tuple[dict, int]:
    instance = _load_instance(args)
    general = _general(instance)
    mech = args.mechanism
    report = _base_report(args, instance)
    report["mechanism"] = mech
    seed = args.seed
    if mech in RANDOMIZED and seed is None:
        log.warning("no --seed given for randomized mechanism %s; using seed 0", mech)
        seed = 0
        report["seed_defaulted"] = True
    trace = None
    if mech in ("mech1", "mech3", "mech3-relaxed"):
        if mech == "mech1":
            trace = mechanism1(general)
        else:
            trace = mechanism3(general, relaxed_stop=mech == "mech3-relaxed")
        matching = trace.matching
        report["stop_reason"] = trace.stop_reason
    elif mech in RANDOMIZED:
        if mech == "mech2":
            outcome = mechanism2(general, coin_from_seed(seed))
        else:
            outcome = mechanism4(general, draw_from_seed(seed))
        matching = outcome.matching
        report["drawn_arm"] = outcome.drawn_arm
        report["expected_welfare"] = str(outcome.expected_welfare)
        report["expected_welfare_decimal"] = decimal6(outcome.expected_welfare)
    else:
        rule = {
            "greedy-density": greedy_by_density,
            "greedy-value": greedy_by_value,
            "max-greedy": max_greedy,
            "gvmax": g_vmax,
        }[mech]
        matching = rule(general)
    report["matching"] = _matching_json(matching)
    report["seed"] = seed
    if args.trace:
        if trace is None:
            log.warning("--trace applies only to mech1, mech3 and mech3-relaxed")
        elif trace.steps:
            print(trace.format(), file=sys.stderr)
    return report, EXIT_OK


def _optimum(instance):
    if isinstance(instance, PositionAuctionInstance):
        return position_optimum(instance)
    return optimal_matching(instance)


def cmd_opt(args) -> tuple[dict, int]:
    instance = _load_instance(args)
    report = _base_report(args, instance)
    report["matching"] = _matching_json(_optimum(instance))
    return report, EXIT_OK


def cmd_ratio(args) -> tuple[dict, int]:
    instance = _load_instance(args)
    if args.mechanism not in RATIO_RULES:
        raise UsageError(f"ratio rule must be one of {', '.join(RATIO_RULES)}")
    rr = ratio_report(instance, args.mechanism)
    report = _base_report(args, instance)
    report["mechanism"] = args.mechanism
    report["opt"] = _matching_json(rr.opt)
    report["rule_welfare"] = str(rr.rule_welfare)
    try:
        ratio = rr.ratio
    except ZeroWelfareError:
        report["opt_ratio"] = None
        report["opt_ratio_decimal"] = "inf"
    else:
        report["opt_ratio"] = str(ratio)
        report["opt_ratio_decimal"] = decimal6(ratio)
    return report, EXIT_OK


def cmd_audit(args) -> tuple[dict | str, int]:
    instance = _require_position(_load_instance(args), "audit")
    if args.mechanism not in AUDITABLE:
        raise UsageError(f"audit mechanism must be one of {', '.join(AUDITABLE)}")
    if args.agent is not None and not 1 <= args.agent <= instance.n_agents:
        raise UsageError(f"--agent must lie in 1..{instance.n_agents}")
    agents = [args.agent] if args.agent is not None else range(1, instance.n_agents + 1)
    reports = [monotonicity_audit(instance, a, args.mechanism) for a in agents]
    found = sum(len(r.violations) for r in reports)
    for r in reports:
        for lo, hi in r.violations:
            log.info("agent %d: CTR drops between bids %s and %s", r.agent, lo, hi)
    code = EXIT_VIOLATION if found else EXIT_OK
    if args.csv:
        return "".join(f"# agent {r.agent}\n{r.to_csv()}" for r in reports), code
    report = _base_report(args, instance)
    report["mechanism"] = args.mechanism
    report["agents"] = [
        {
            "agent": r.agent,
            "probes": len(r.probes),
            "violations": [[str(lo), str(hi), str(r.ctr_at(lo)), str(r.ctr_at(hi))] for lo, hi in r.violations],
        }
        for r in reports
    ]
    report["violation_count"] = found
    return report, code


def cmd_payments(args) -> tuple[str, int]:
    instance = _require_position(_load_instance(args), "payments")
    try:
        return payments_csv(instance, args.mechanism), EXIT_OK
    except NonMonotoneError as exc:
        raise UsageError(str(exc)) from None


def cmd_experiment(args) -> tuple[dict, int]:
    if args.family not in FAMILIES:
        raise UsageError(f"experiment family must be one of {', '.join(FAMILIES)}")
    try:
        config = ExperimentConfig(
            family=args.family,
            trials=args.trials,
            seed=args.seed or 0,
            max_agents=args.max_agents,
            max_positions=args.max_positions,
            audit=not args.no_audit,
            workers=args.workers,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    summary = summarize(config, run_experiment(config))
    report = {"command": args.echo, **summary}
    return report, EXIT_VIOLATION if summary["total_violations"] else EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "opt": cmd_opt,
    "ratio": cmd_ratio,
    "audit": cmd_audit,
    "payments": cmd_payments,
    "experiment": cmd_experiment,
}


class _SubParser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs["allow_abbrev"] = False
        super().__init__(*args, **kwargs)


def _known_flags(parser: argparse.ArgumentParser) -> set[str]:
    flags = set()
    for action in parser._actions:
        flags.update(action.option_strings)
        if isinstance(action, argparse._SubParsersAction):
            for sp in action.choices.values():
                flags |= _known_flags(sp)
    return flags


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capmatch", description=__doc__.splitlines()[0], allow_abbrev=False)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_SubParser)

    def instance_args(p, with_mechanism=True, choices=None):
        p.add_argument("instance_pos", nargs="?", metavar="INSTANCE", help="instance JSON file")
        if with_mechanism:
            p.add_argument("mechanism_pos", nargs="?", metavar="MECHANISM", choices=choices)
            p.add_argument("--mechanism", choices=choices)
        p.add_argument("--instance", help="instance JSON file")
        p.add_argument("--family", help="catalog instance name; parameters as --<param> <rational>")

    p = sub.add_parser("solve", help="run an allocation rule")
    instance_args(p, choices=MECHANISMS)
    p.add_argument("--seed", type=int)
    p.add_argument("--trace", action="store_true", help="write the examination log to stderr")

    p = sub.add_parser("opt", help="exact optimum")
    instance_args(p, with_mechanism=False)

    p = sub.add_parser("ratio", help="OPT / rule welfare")
    instance_args(p, choices=RATIO_RULES)

    p = sub.add_parser("audit", help="bid-sweep monotonicity audit")
    instance_args(p, choices=AUDITABLE)
    p.add_argument("--agent", type=int)
    p.add_argument("--csv", action="store_true", help="emit probe tables as CSV")

    p = sub.add_parser("payments", help="threshold payments as CSV")
    instance_args(p, choices=MECHANISMS)

    p = sub.add_parser("experiment", help="randomized sweep of the approximation and monotonicity checks")
    p.add_argument("--family", default="random-general", choices=FAMILIES)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-agents", type=int, default=7)
    p.add_argument("--max-positions", type=int, default=4)
    p.add_argument("--no-audit", action="store_true", help="skip monotonicity audits")
    p.add_argument("--workers", type=int, default=1)
    return parser


def _normalize(args, parser):
    if args.command == "experiment":
        return
    pos = getattr(args, "instance_pos", None)
    if pos is not None and args.family and hasattr(args, "mechanism_pos") and args.mechanism_pos is None:
        # `ratio --family NAME RULE`: the single positional is the rule
        args.mechanism_pos, pos = pos, None
    if pos is not None:
        if args.instance:
            parser.error("instance given twice")
        args.instance = pos
    if hasattr(args, "mechanism_pos"):
        if args.mechanism_pos is not None:
            if args.mechanism:
                parser.error("mechanism given twice")
            args.mechanism = args.mechanism_pos
        if args.mechanism is None:
            parser.error("a mechanism is required")
    if getattr(args, "seed", None) is not None and not 0 <= args.seed <= _MASK64:
        parser.error("--seed must be an unsigned 64-bit integer")


def _configure_logging(verbose: bool):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.DEBUG if verbose else logging.INFO)
    log.propagate = False


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        rest, params = _split_params(argv, _known_flags(parser))
    except UsageError as exc:
        parser.error(str(exc))
    args = parser.parse_args(rest)
    args.params = params
    _configure_logging(args.verbose)
    if params and (args.command == "experiment" or not args.family):
        parser.error(f"unknown options: {' '.join('--' + k for k in params)}")
    _normalize(args, parser)
    args.echo = ["capmatch", *argv]

    start = time.perf_counter()
    try:
        out, code = COMMANDS[args.command](args)
    except (UsageError, InstanceFormatError, ParameterError) as exc:
        print(f"capmatch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OracleGuardError as exc:
        print(
            f"capmatch: oracle guard exceeded ({exc}); limits: n <= {MAX_ORACLE_AGENTS}, k <= {MAX_ORACLE_POSITIONS}",
            file=sys.stderr,
        )
        return EXIT_GUARD
    if isinstance(out, dict):
        out["wall_time"] = round(time.perf_counter() - start, 6)
        print(json.dumps(out, indent=2))
    else:
        sys.stdout.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
