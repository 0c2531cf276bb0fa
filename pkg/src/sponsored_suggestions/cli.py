"""Command-line entry point.

Exit codes: 0 success or verified, 1 a negative result (violations, a
profitable deviation, an incomplete profile, bad parameters), 2 usage or
parse errors.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import io as docs
from .analysis import (
    DeviationClass, EquilibriumReport, default_deviations, poa, value_grid, verify_direct_dsic,
    verify_modular_nash, verify_proxy,
)
from .direct import TiePolicy, decompose_payment, run_direct, sample_trajectories
from .instances import gen_poa_instance, gen_proxy_counterexample, gen_running_shoes, pay_your_bid_profile
from .model import Instance, ModelError, to_rational, validate
from .modular import IncompleteProfileError, ModularOutcome, Stage1Rule, prescribed_equilibrium, run_modular, run_proxy

OK, NEGATIVE, USAGE = 0, 1, 2
RULES = {"vcg": "vcg", "first-price": "first_price", "all-pay": "all_pay"}


class Negative(Exception):
    """Domain-level failure; reported on stderr with exit status 1."""


def rational(text: str) -> Fraction:
    try:
        return to_rational(text)
    except (TypeError, ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def rational_list(text: str) -> list[Fraction]:
    return [rational(x) for x in text.split(",") if x.strip()]


def _emit(text: str) -> None:
    sys.stdout.write(text)


def _fmt(args) -> str:
    if args.format:
        return args.format
    return "table" if sys.stdout.isatty() else "structured"


def _report(args, kind: str, body: dict) -> None:
    _emit(docs.render_report(kind, body, _fmt(args), args.precision))


def _load(path: str, require_valid: bool = True) -> Instance:
    instance = docs.load_instance(path)
    if require_valid:
        problems = validate(instance)
        if problems:
            raise Negative("invalid instance:\n" + "\n".join(problems))
    return instance


def _ties(args, instance: Instance, default: Optional[TiePolicy] = None) -> TiePolicy:
    if not args.ties:
        return default or TiePolicy()
    labels = [x.strip() for x in args.ties.split(",") if x.strip()]
    try:
        return TiePolicy.from_labels(instance, labels)
    except KeyError as exc:
        raise argparse.ArgumentTypeError(str(exc.args[0])) from None


def _bids(args, instance: Instance) -> tuple[Fraction, ...]:
    if args.bids:
        return tuple(args.bids)
    return instance.base_values


def _adv(instance: Instance, i: Optional[int]) -> Optional[str]:
    return None if i is None else instance.advertiser_ids[i]


# --- subcommands ---------------------------------------------------------------

def cmd_validate(args) -> int:
    instance = _load(args.path, require_valid=False)
    problems = validate(instance)
    for line in problems:
        print(line)
    if not problems:
        print(f"{args.path}: valid")
    return NEGATIVE if problems else OK


def cmd_run_direct(args) -> int:
    instance = _load(args.path)
    bids = _bids(args, instance)
    ties = _ties(args, instance)
    out = run_direct(instance, bids, ties)
    parts = decompose_payment(instance, bids, ties)
    body = {
        "question": out.chosen_question,
        "expected_welfare": out.expected_welfare,
        "advertisers": [
            {
                "id": a.id,
                "bid": bids[i],
                "expected_value": a.base_value * out.expected_delivered_conversion[i],
                "expected_payment": out.expected_payment[i],
                "stage1_externality": parts.shares[i].stage1_externality,
                "expected_second_price": parts.shares[i].expected_second_price,
                "expected_utility": out.expected_utility[i],
            }
            for i, a in enumerate(instance.advertisers)
        ],
        "signals": [
            {
                "signal": row.signal,
                "probability": row.marginal,
                "winner": _adv(instance, out.per_signal[row.signal].winner),
                "winner_effective_value": out.per_signal[row.signal].winner_effective_value,
                "second_price": out.per_signal[row.signal].second_price,
            }
            for row in instance.rows(out.chosen_question)
        ],
    }
    _report(args, "direct", body)
    return OK


def _modular_body(instance: Instance, out: ModularOutcome) -> dict:
    return {
        "question": out.chosen_question,
        "expected_welfare": out.expected_welfare,
        "stage1_totals": dict(zip(instance.question_ids, out.stage1_totals)),
        "advertisers": [
            {
                "id": a.id,
                "stage1_payment": out.stage1_payments[i],
                "stage2_utility": out.stage2_utility[i],
                "expected_utility": out.expected_utility[i],
            }
            for i, a in enumerate(instance.advertisers)
        ],
        "signals": [
            {
                "signal": row.signal,
                "probability": row.marginal,
                "winner": _adv(instance, out.per_signal[row.signal].winner),
                "payment": out.per_signal[row.signal].payment,
            }
            for row in instance.rows(out.chosen_question)
        ],
    }


def _reports(instance: Instance, given: Sequence[Fraction]) -> tuple[Fraction, ...]:
    # advertisers beyond the given reports report their true values
    if len(given) > instance.n_advertisers:
        raise Negative(f"expected at most {instance.n_advertisers} reports, got {len(given)}")
    return tuple(given) + instance.base_values[len(given):]


def _profile(args, instance: Instance, ties: TiePolicy):
    if args.profile:
        return docs.load_profile(instance, args.profile)
    return prescribed_equilibrium(instance, None, ties)


def cmd_run_modular(args) -> int:
    instance = _load(args.path)
    ties = _ties(args, instance)
    if args.proxy is not None:
        reports = _reports(instance, args.proxy)
        out = run_proxy(instance, reports, None, ties)
        body = _modular_body(instance, out)
        body["reports"] = dict(zip(instance.advertiser_ids, reports))
    else:
        rule = Stage1Rule(RULES[args.rule], ties)
        out = run_modular(instance, _profile(args, instance, ties), rule)
        body = _modular_body(instance, out)
        body["rule"] = args.rule
    _report(args, "modular", body)
    return OK


def cmd_poa_sweep(args) -> int:
    if args.m_from < 3:
        raise Negative("m must be at least 3")
    if args.m_to < args.m_from:
        raise Negative("--m-to must not be smaller than --m-from")
    rows = []
    for m in range(args.m_from, args.m_to + 1):
        delta = Fraction(1, m * m) if args.delta == "auto" else rational(args.delta)
        instance = gen_poa_instance(m, delta)
        if args.rule == "vcg":
            ties = _ties(args, instance)
            profile = prescribed_equilibrium(instance, None, ties)
        else:
            ties = _ties(args, instance, TiePolicy(questions=("q2",)))
            profile = pay_your_bid_profile(m, delta)
        rule = Stage1Rule(RULES[args.rule], ties)
        rep = poa(instance, profile, rule)
        chosen = run_modular(instance, profile, rule).chosen_question
        rows.append({
            "m": m,
            "delta": delta,
            "question": chosen,
            "optimal": rep.optimal_welfare,
            "equilibrium": rep.equilibrium_welfare,
            "ratio": "inf" if rep.infinite else rep.ratio,
        })
    _emit(docs.render_rows("poa-sweep", rows, _fmt(args), args.precision))
    return OK


def _equilibrium_body(instance: Instance, rep: EquilibriumReport, mechanism: str) -> dict:
    witness = rep.witness()
    return {
        "mechanism": mechanism,
        "verdict": rep.verdict,
        "epsilon": rep.epsilon,
        "evaluated": rep.evaluated,
        "stage1_complete": rep.stage1_complete,
        "advertisers": [
            {"id": a.id, "best_deviation_gain": d.best_deviation_gain, "best_deviation": d.best_deviation}
            for a, d in zip(instance.advertisers, rep.advertisers)
        ],
        "witness": None if witness is None else {
            "advertiser": instance.advertiser_ids[witness[0]],
            "gain": witness[1].best_deviation_gain,
            "deviation": witness[1].best_deviation,
        },
    }


def cmd_verify(args) -> int:
    instance = _load(args.path)
    ties = _ties(args, instance)
    if args.proxy_grid is not None:
        rep = verify_proxy(instance, args.proxy_grid, None, args.epsilon, ties)
        mechanism = "proxy"
    elif args.mechanism == "direct":
        rep = verify_direct_dsic(instance, DeviationClass(value_grid(instance, args.grid)), args.epsilon, ties)
        mechanism = "direct"
    else:
        rule = Stage1Rule(RULES[args.rule], ties)
        profile = _profile(args, instance, ties)
        dev = default_deviations(instance, profile, multipliers=args.grid)
        if args.stage1_levels is not None:
            levels = tuple(sorted(set(args.stage1_levels)))
            dev = DeviationClass(dev.value_grid, tuple({q: levels for q in instance.question_ids} for _ in profile),
                                 dev.force_question)
        if args.no_force:
            dev = DeviationClass(dev.value_grid, dev.stage1_grid, False)
        rep = verify_modular_nash(instance, profile, rule, None, dev, args.epsilon)
        mechanism = f"modular/{args.rule}"
    _report(args, "equilibrium", _equilibrium_body(instance, rep, mechanism))
    return OK if rep.ok else NEGATIVE


def cmd_gen(args) -> int:
    if args.family == "running-shoes":
        instance = gen_running_shoes()
    elif args.family == "prop1":
        instance = gen_proxy_counterexample()
    else:
        if args.m < 3:
            raise Negative("m must be at least 3")
        delta = Fraction(1, args.m * args.m) if args.delta is None else args.delta
        try:
            instance = gen_poa_instance(args.m, delta)
        except ValueError as exc:
            raise Negative(str(exc)) from None
    text = docs.emit_instance(instance)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        _emit(text)
    return OK


def cmd_sample(args) -> int:
    instance = _load(args.path)
    if args.count < 1:
        raise Negative("--count must be positive")
    seeds = range(args.seed, args.seed + args.count)
    rows = [
        {
            "seed": t.seed,
            "state": t.state,
            "question": t.question,
            "signal": t.signal,
            "winner": _adv(instance, t.winner),
            "second_price": t.second_price,
        }
        for t in sample_trajectories(instance, _bids(args, instance), seeds, _ties(args, instance))
    ]
    _emit(docs.render_rows("sample", rows, _fmt(args), args.precision))
    return OK


# --- parser --------------------------------------------------------------------

def _common(suppress: bool) -> argparse.ArgumentParser:
    # shared flags are accepted before or after the subcommand
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--ties", default=d(None), metavar="LABELS",
                   help="comma-separated question and advertiser labels, highest priority first")
    p.add_argument("--format", choices=("table", "structured", "csv"), default=d(None),
                   help="output format (default: table on a terminal, structured otherwise)")
    p.add_argument("--precision", type=int, default=d(6), help="significant digits in decimal columns")
    p.add_argument("--seed", type=int, default=d(0), help="first seed for sampling")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sponsored-suggestions", parents=[_common(False)],
                                     description="Auctions for sponsored suggestions, in exact arithmetic.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common(True)

    p = sub.add_parser("validate", parents=[common], help="check an instance document")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run-direct", parents=[common], help="run the end-to-end VCG mechanism")
    p.add_argument("path")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--bids", nargs="+", type=rational, help="one base-value bid per advertiser")
    g.add_argument("--truthful", action="store_true", help="bid the instance base values (default)")
    p.set_defaults(func=cmd_run_direct)

    def profile_opts(p: argparse.ArgumentParser, proxy: bool) -> None:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--profile", help="strategy profile document")
        g.add_argument("--prescribed", action="store_true",
                       help="truthful stage 2, stage-1 bid = expected stage-2 payoff (default)")
        if proxy:
            g.add_argument("--proxy", nargs="+", type=rational, metavar="REPORT",
                           help="reported base values; the platform bids for everyone")
        p.add_argument("--rule", choices=tuple(RULES), default="vcg", help="stage-1 payment rule")

    p = sub.add_parser("run-modular", parents=[common], help="run the two-stage mechanism")
    p.add_argument("path")
    profile_opts(p, proxy=True)
    p.set_defaults(func=cmd_run_modular)

    p = sub.add_parser("poa-sweep", parents=[common], help="price of anarchy across m")
    p.add_argument("--family", choices=("poa",), default="poa")
    p.add_argument("--m-from", type=int, required=True)
    p.add_argument("--m-to", type=int, required=True)
    p.add_argument("--delta", default="auto", help="'auto' (1/m^2) or a rational")
    p.add_argument("--rule", choices=tuple(RULES), default="vcg")
    p.set_defaults(func=cmd_poa_sweep)

    p = sub.add_parser("verify", parents=[common], help="search for profitable unilateral deviations")
    p.add_argument("path")
    p.add_argument("--mechanism", choices=("direct", "modular"), default="direct")
    profile_opts(p, proxy=False)
    p.add_argument("--grid", type=rational_list, default=[Fraction(0), Fraction(1, 2), Fraction(1), Fraction(2)],
                   help="comma-separated multipliers of each base value (default 0,1/2,1,2)")
    p.add_argument("--stage1-levels", type=rational_list,
                   help="comma-separated stage-1 bid levels replacing the default threshold grid")
    p.add_argument("--no-force", action="store_true", help="skip the forcing stage-1 deviations")
    p.add_argument("--proxy-grid", nargs="+", type=rational, metavar="REPORT",
                   help="check truthful proxy reporting against these misreports")
    p.add_argument("--epsilon", type=rational, default=Fraction(0))
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen", parents=[common], help="write a named instance document")
    p.add_argument("--family", choices=("running-shoes", "poa", "prop1"), required=True)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--delta", type=rational, help="defaults to 1/m^2")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sample", parents=[common], help="simulate seeded trajectories of the direct mechanism")
    p.add_argument("path")
    p.add_argument("--bids", nargs="+", type=rational)
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except docs.DocumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except argparse.ArgumentTypeError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except IncompleteProfileError as exc:
        print("error: incomplete profile; missing cells:", file=sys.stderr)
        for cell in exc.missing:
            print(f"  {cell}", file=sys.stderr)
        return NEGATIVE
    except (Negative, ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NEGATIVE


if __name__ == "__main__":
    sys.exit(main())
