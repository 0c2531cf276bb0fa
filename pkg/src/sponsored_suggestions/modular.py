"""Two-stage modular mechanisms.

Stage 1 auctions off the question using per-question bids and a
highest-total-bid rule (VCG, first-price or all-pay payments). Stage 2 runs a
second-price auction on effective bids for whatever signal the chosen question
produced. Strategies are fixed contingent plans, so one profile determines the
whole outcome.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

from .direct import DEFAULT_TIES, ZERO, TiePolicy, _row, argmax
from .model import Instance

VARIANTS = ("vcg", "first_price", "all_pay")


@dataclass(frozen=True)
class Strategy:
    stage1: Mapping[str, Fraction]
    stage2: Mapping[tuple[str, str], Fraction]


StrategyProfile = tuple[Strategy, ...]


class IncompleteProfileError(ValueError):
    def __init__(self, missing: list[str]):
        super().__init__("profile is missing bids: " + ", ".join(missing))
        self.missing = missing


@dataclass(frozen=True)
class Stage1Rule:
    variant: str = "vcg"
    ties: TiePolicy = DEFAULT_TIES

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown stage-1 rule {self.variant!r}; expected one of {VARIANTS}")


@dataclass(frozen=True)
class Stage1Result:
    chosen: int
    payments: tuple[Fraction, ...]


@dataclass(frozen=True)
class Stage2Result:
    winner: Optional[int]
    payment: Fraction


@dataclass(frozen=True)
class ModularOutcome:
    chosen_question: str
    stage1_totals: tuple[Fraction, ...]
    stage1_payments: tuple[Fraction, ...]
    per_signal: dict[str, Stage2Result]
    expected_utility: tuple[Fraction, ...]
    expected_welfare: Fraction
    # stage-2 expected utility per advertiser, before stage-1 payments
    stage2_utility: tuple[Fraction, ...] = field(default=())


def _totals(bids: Sequence[Sequence[Fraction]], k: int, skip: Optional[int] = None) -> list[Fraction]:
    return [sum((row[q] for j, row in enumerate(bids) if j != skip), ZERO) for q in range(k)]


def _order(order: Optional[Sequence[int]], k: int) -> Sequence[int]:
    return range(k) if order is None else order


def _choose(bids, question_order) -> tuple[int, int]:
    k = len(bids[0])
    return argmax(_totals(bids, k), list(_order(question_order, k))), k


def stage1_vcg(bids: Sequence[Sequence[Fraction]], question_order: Optional[Sequence[int]] = None) -> Stage1Result:
    """Pick the question with the largest total bid and charge Clarke externalities.

    ``bids[i][q]`` is advertiser i's bid on question q (0-based, instance order).
    """
    chosen, k = _choose(bids, question_order)
    payments = []
    for i in range(len(bids)):
        rest = _totals(bids, k, skip=i)
        payments.append(max(rest) - rest[chosen])
    return Stage1Result(chosen, tuple(payments))


def stage1_first_price(bids: Sequence[Sequence[Fraction]], question_order: Optional[Sequence[int]] = None,
                       advertiser_order: Optional[Sequence[int]] = None) -> Stage1Result:
    """Only the single highest bidder on the chosen question pays its bid."""
    chosen, _ = _choose(bids, question_order)
    n = len(bids)
    top = argmax([row[chosen] for row in bids], list(_order(advertiser_order, n)))
    return Stage1Result(chosen, tuple(bids[i][chosen] if i == top else ZERO for i in range(n)))


def stage1_all_pay(bids: Sequence[Sequence[Fraction]], question_order: Optional[Sequence[int]] = None) -> Stage1Result:
    chosen, _ = _choose(bids, question_order)
    return Stage1Result(chosen, tuple(row[chosen] for row in bids))


def run_stage1(instance: Instance, bids: Sequence[Sequence[Fraction]], rule: Stage1Rule) -> Stage1Result:
    q_order = rule.ties.question_order(instance)
    if rule.variant == "vcg":
        return stage1_vcg(bids, q_order)
    if rule.variant == "first_price":
        return stage1_first_price(bids, q_order, rule.ties.advertiser_order(instance))
    return stage1_all_pay(bids, q_order)


def _second_price(eff: Sequence[Fraction], order: Sequence[int]) -> Stage2Result:
    w = argmax(eff, order)
    if eff[w] <= 0:
        return Stage2Result(None, ZERO)
    return Stage2Result(w, max((e for j, e in enumerate(eff) if j != w), default=ZERO))


def stage2_auction(instance: Instance, stage2_bids: Sequence[Fraction], question: str, signal: str,
                   ties: TiePolicy = DEFAULT_TIES) -> Stage2Result:
    """Second-price auction on effective bids at one realized signal."""
    instance.check_bids(stage2_bids)
    row = _row(instance, question, signal)
    eff = [b * a for b, a in zip(stage2_bids, row.conversions)]
    return _second_price(eff, ties.advertiser_order(instance))


Stage2Bids = Union[Sequence[Fraction], Mapping[tuple[str, str], Sequence[Fraction]]]


def _cell_bids(stage2_bids: Stage2Bids, question: str, signal: str) -> Sequence[Fraction]:
    if isinstance(stage2_bids, Mapping):
        return stage2_bids[(question, signal)]
    return stage2_bids


def _stage2_utilities(instance: Instance, true_values: Sequence[Fraction], stage2_bids: Stage2Bids,
                      question: str, order: Sequence[int]):
    n = instance.n_advertisers
    utility = [ZERO] * n
    welfare = ZERO
    per_signal = {}
    for row in instance.rows(question):
        bids = _cell_bids(stage2_bids, question, row.signal)
        res = _second_price([b * a for b, a in zip(bids, row.conversions)], order)
        per_signal[row.signal] = res
        if res.winner is not None:
            value = true_values[res.winner] * row.conversions[res.winner]
            utility[res.winner] += row.marginal * (value - res.payment)
            welfare += row.marginal * value
    return utility, welfare, per_signal


def stage2_expected_utility(instance: Instance, true_values: Sequence[Fraction], stage2_bids: Stage2Bids,
                            question: str, advertiser: int, ties: TiePolicy = DEFAULT_TIES) -> Fraction:
    """Expected stage-2 payoff of ``advertiser`` if ``question`` is asked.

    ``stage2_bids`` is either one bid vector used at every signal or a mapping
    from ``(question, signal)`` to bid vectors.
    """
    instance.check_bids(true_values)
    utility, _, _ = _stage2_utilities(instance, true_values, stage2_bids, question,
                                      ties.advertiser_order(instance))
    return utility[advertiser]


def profile_gaps(instance: Instance, profile: Sequence[Strategy]) -> list[str]:
    """Missing or negative bids, as human-readable cell names; empty when usable."""
    if len(profile) != instance.n_advertisers:
        return [f"expected {instance.n_advertisers} strategies, got {len(profile)}"]
    gaps = []
    for a, s in zip(instance.advertisers, profile):
        for q in instance.question_ids:
            bid = s.stage1.get(q)
            if bid is None:
                gaps.append(f"{a.id}: stage1[{q}]")
            elif bid < 0:
                gaps.append(f"{a.id}: stage1[{q}] is negative")
            for row in instance.rows(q):
                bid = s.stage2.get((q, row.signal))
                if bid is None:
                    gaps.append(f"{a.id}: stage2[{q}, {row.signal}]")
                elif bid < 0:
                    gaps.append(f"{a.id}: stage2[{q}, {row.signal}] is negative")
    return gaps


def stage1_matrix(instance: Instance, profile: Sequence[Strategy]) -> list[list[Fraction]]:
    return [[s.stage1[q] for q in instance.question_ids] for s in profile]


def run_modular(instance: Instance, profile: Sequence[Strategy], rule: Stage1Rule,
                true_values: Optional[Sequence[Fraction]] = None) -> ModularOutcome:
    """Execute both stages; utilities and welfare use ``true_values`` (instance values by default)."""
    gaps = profile_gaps(instance, profile)
    if gaps:
        raise IncompleteProfileError(gaps)
    values = instance.base_values if true_values is None else tuple(true_values)
    instance.check_bids(values)

    bids = stage1_matrix(instance, profile)
    s1 = run_stage1(instance, bids, rule)
    question = instance.question_ids[s1.chosen]
    cells = {
        (question, row.signal): [s.stage2[(question, row.signal)] for s in profile]
        for row in instance.rows(question)
    }
    s2_utility, welfare, per_signal = _stage2_utilities(
        instance, values, cells, question, rule.ties.advertiser_order(instance))
    utility = tuple(u - p for u, p in zip(s2_utility, s1.payments))
    return ModularOutcome(question, tuple(_totals(bids, len(instance.questions))), s1.payments,
                          per_signal, utility, welfare, tuple(s2_utility))


def truthful_stage2(instance: Instance, values: Sequence[Fraction], i: int) -> dict[tuple[str, str], Fraction]:
    return {(q.id, sig): values[i] for q in instance.questions for sig in q.signals}


def prescribed_equilibrium(instance: Instance, true_values: Optional[Sequence[Fraction]] = None,
                           ties: TiePolicy = DEFAULT_TIES) -> StrategyProfile:
    """Truthful stage-2 bids everywhere; stage-1 bid on each question = its expected stage-2 payoff."""
    values = instance.base_values if true_values is None else tuple(true_values)
    instance.check_bids(values)
    order = ties.advertiser_order(instance)
    per_question = {
        q: _stage2_utilities(instance, values, values, q, order)[0] for q in instance.question_ids
    }
    return tuple(
        Strategy({q: per_question[q][i] for q in instance.question_ids}, truthful_stage2(instance, values, i))
        for i in range(instance.n_advertisers)
    )


def run_proxy(instance: Instance, reported_values: Sequence[Fraction],
              true_values: Optional[Sequence[Fraction]] = None,
              ties: TiePolicy = DEFAULT_TIES) -> ModularOutcome:
    """Platform bids on the advertisers' behalf from reported base values, then runs VCG per stage."""
    reported = tuple(reported_values)
    if any(r < 0 for r in reported):
        raise ValueError("reported values must be non-negative")
    profile = prescribed_equilibrium(instance, reported, ties)
    return run_modular(instance, profile, Stage1Rule("vcg", ties), true_values)
