"""End-to-end welfare-maximizing mechanism with VCG payments.

One round of base-value bids picks the question with the highest expected
reported welfare, allocates each realized signal to the highest effective
bid, and charges every advertiser its expected externality on the others.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Iterable, Optional, Sequence

from .model import Instance, SignalRow, UnknownLabelError, ZeroMeasureSignalError

ZERO = Fraction(0)


@dataclass(frozen=True)
class TiePolicy:
    """Priority order for breaking argmax ties.

    Either ordering may list only a prefix of the labels; unlisted labels
    follow in instance order. ``None`` means plain instance order.
    """

    questions: Optional[tuple[str, ...]] = None
    advertisers: Optional[tuple[str, ...]] = None

    @classmethod
    def from_labels(cls, instance: Instance, labels: Iterable[str]) -> "TiePolicy":
        """Split one mixed list of question and advertiser labels into both orderings."""
        qs, ads = [], []
        for label in labels:
            if label in instance.question_ids:
                qs.append(label)
            elif label in instance.advertiser_ids:
                ads.append(label)
            else:
                raise UnknownLabelError(f"tie label {label!r} is neither a question nor an advertiser")
        return cls(tuple(qs) or None, tuple(ads) or None)

    @staticmethod
    def _order(prefix: Optional[tuple[str, ...]], labels: tuple[str, ...]) -> tuple[int, ...]:
        if prefix is None:
            return tuple(range(len(labels)))
        if len(set(prefix)) != len(prefix):
            raise ValueError(f"tie ordering repeats a label: {prefix}")
        try:
            head = [labels.index(x) for x in prefix]
        except ValueError:
            raise UnknownLabelError(f"tie ordering {prefix} names unknown labels") from None
        return tuple(head) + tuple(i for i in range(len(labels)) if i not in head)

    def question_order(self, instance: Instance) -> tuple[int, ...]:
        return self._order(self.questions, instance.question_ids)

    def advertiser_order(self, instance: Instance) -> tuple[int, ...]:
        return self._order(self.advertisers, instance.advertiser_ids)


DEFAULT_TIES = TiePolicy()


def argmax(values: Sequence[Fraction], order: Sequence[int]) -> int:
    """Index of the largest value; among equals, the earliest in ``order``."""
    best = order[0]
    for i in order[1:]:
        if values[i] > values[best]:
            best = i
    return best


@dataclass(frozen=True)
class SignalOutcome:
    winner: Optional[int]
    winner_effective_value: Fraction
    second_price: Fraction


@dataclass(frozen=True)
class DirectOutcome:
    chosen_question: str
    per_signal: dict[str, SignalOutcome]
    expected_welfare: Fraction
    expected_payment: tuple[Fraction, ...]
    expected_delivered_conversion: tuple[Fraction, ...]
    expected_utility: tuple[Fraction, ...]


@dataclass(frozen=True)
class PaymentShare:
    stage1_externality: Fraction
    expected_second_price: Fraction

    @property
    def total(self) -> Fraction:
        return self.stage1_externality + self.expected_second_price


@dataclass(frozen=True)
class PaymentDecomposition:
    shares: tuple[PaymentShare, ...]

    @property
    def totals(self) -> tuple[Fraction, ...]:
        return tuple(s.total for s in self.shares)


def _winner(row: SignalRow, bids: Sequence[Fraction], order: Sequence[int]) -> Optional[int]:
    eff = [b * a for b, a in zip(bids, row.conversions)]
    i = argmax(eff, order)
    return i if eff[i] > 0 else None


def _best_without(row: SignalRow, bids: Sequence[Fraction], excluded: int) -> Fraction:
    return max((b * a for j, (b, a) in enumerate(zip(bids, row.conversions)) if j != excluded), default=ZERO)


def _question_welfare(instance: Instance, bids, question: str, excluded: Optional[int] = None) -> Fraction:
    total = ZERO
    for row in instance.rows(question):
        if excluded is None:
            total += row.marginal * max(b * a for b, a in zip(bids, row.conversions))
        else:
            total += row.marginal * _best_without(row, bids, excluded)
    return total


def _check(instance: Instance, bids: Sequence[Fraction]) -> None:
    instance.check_bids(bids)
    if any(b < 0 for b in bids):
        raise ValueError("bids must be non-negative")


def select_question(instance: Instance, bids: Sequence[Fraction], ties: TiePolicy = DEFAULT_TIES) -> str:
    _check(instance, bids)
    welfare = [_question_welfare(instance, bids, q) for q in instance.question_ids]
    return instance.question_ids[argmax(welfare, ties.question_order(instance))]


def _row(instance: Instance, question: str, signal: str) -> SignalRow:
    if signal not in instance.question(question).signals:
        raise UnknownLabelError(f"question {question!r} has no signal {signal!r}")
    for row in instance.rows(question):
        if row.signal == signal:
            return row
    raise ZeroMeasureSignalError(f"signal {signal!r} of {question!r} has probability 0")


def allocate(instance: Instance, bids: Sequence[Fraction], question: str, signal: str,
             ties: TiePolicy = DEFAULT_TIES) -> Optional[int]:
    """Winner of the item at ``(question, signal)``, or None when every effective bid is 0."""
    _check(instance, bids)
    return _winner(_row(instance, question, signal), bids, ties.advertiser_order(instance))


def welfare_without(instance: Instance, bids: Sequence[Fraction], excluded: int) -> Fraction:
    """Best expected reported welfare of everyone but ``excluded`` over all questions."""
    _check(instance, bids)
    if not 0 <= excluded < instance.n_advertisers:
        raise IndexError(f"advertiser index {excluded} out of range")
    return max(_question_welfare(instance, bids, q, excluded) for q in instance.question_ids)


def run_direct(instance: Instance, bids: Sequence[Fraction], ties: TiePolicy = DEFAULT_TIES) -> DirectOutcome:
    _check(instance, bids)
    n = instance.n_advertisers
    chosen = select_question(instance, bids, ties)
    order = ties.advertiser_order(instance)

    per_signal: dict[str, SignalOutcome] = {}
    welfare = ZERO
    delivered = [ZERO] * n
    # reported welfare of the others at the chosen question, per advertiser
    others = [ZERO] * n
    for row in instance.rows(chosen):
        w = _winner(row, bids, order)
        if w is None:
            per_signal[row.signal] = SignalOutcome(None, ZERO, ZERO)
            continue
        value = bids[w] * row.conversions[w]
        per_signal[row.signal] = SignalOutcome(w, value, _best_without(row, bids, w))
        welfare += row.marginal * value
        delivered[w] += row.marginal * row.conversions[w]
        for i in range(n):
            if i != w:
                others[i] += row.marginal * value

    payments = tuple(welfare_without(instance, bids, i) - others[i] for i in range(n))
    utility = tuple(v * x - p for v, x, p in zip(instance.base_values, delivered, payments))
    return DirectOutcome(chosen, per_signal, welfare, payments, tuple(delivered), utility)


def decompose_payment(instance: Instance, bids: Sequence[Fraction],
                      ties: TiePolicy = DEFAULT_TIES) -> PaymentDecomposition:
    """Split each VCG payment into a question-choice externality and an expected second price."""
    _check(instance, bids)
    chosen = select_question(instance, bids, ties)
    order = ties.advertiser_order(instance)
    shares = []
    for i in range(instance.n_advertisers):
        sw = {q: _question_welfare(instance, bids, q, excluded=i) for q in instance.question_ids}
        second = ZERO
        for row in instance.rows(chosen):
            if _winner(row, bids, order) == i:
                second += row.marginal * _best_without(row, bids, i)
        shares.append(PaymentShare(max(sw.values()) - sw[chosen], second))
    return PaymentDecomposition(tuple(shares))


@dataclass(frozen=True)
class Trajectory:
    seed: int
    state: str
    question: str
    signal: str
    winner: Optional[int]
    second_price: Fraction
    expected_payment: tuple[Fraction, ...]


def _draw(rng: random.Random, items: Sequence[str], weights: Sequence[Fraction]) -> str:
    # exact inverse-CDF draw on a common denominator
    scale = lcm(*(w.denominator for w in weights))
    ticket = rng.randrange(scale)
    acc = 0
    for item, w in zip(items, weights):
        acc += int(w * scale)
        if ticket < acc:
            return item
    raise ValueError("weights do not sum to 1")


def sample_trajectories(instance: Instance, bids: Sequence[Fraction], seeds: Iterable[int],
                        ties: TiePolicy = DEFAULT_TIES) -> list[Trajectory]:
    """Simulate the timing (state, question, signal, allocation) once per seed."""
    outcome = run_direct(instance, bids, ties)
    q = instance.question(outcome.chosen_question)
    prior = [instance.prior[t] for t in instance.states]
    out = []
    for seed in seeds:
        rng = random.Random(seed)
        state = _draw(rng, instance.states, prior)
        signal = _draw(rng, q.signals, [q.prob(s, state) for s in q.signals])
        res = outcome.per_signal[signal]
        out.append(Trajectory(seed, state, q.id, signal, res.winner, res.second_price,
                              outcome.expected_payment))
    return out


def sample_trajectory(instance: Instance, bids: Sequence[Fraction], ties: TiePolicy = DEFAULT_TIES,
                      seed: int = 0) -> Trajectory:
    return sample_trajectories(instance, bids, [seed], ties)[0]
