"""Instances, Bayesian belief updates and effective values, in exact rationals.

An instance is a public prior over latent user states, a set of questions
(each a signal channel ``Q(signal | state)``), and advertisers with a private
base value and public state-dependent conversion rates.

Advertisers are addressed by 0-based position everywhere in the Python API.
Questions, signals and states are addressed by their string labels.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence, Union

RationalLike = Union[Fraction, int, str, Sequence[int]]

_DECIMAL = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_RATIO = re.compile(r"^[+-]?\d+\s*/\s*\d+$")


class ModelError(Exception):
    """Base class for instance lookup and evaluation errors."""


class UnknownLabelError(ModelError, KeyError):
    pass


class ZeroMeasureSignalError(ModelError, ValueError):
    """The posterior is undefined for a signal that has probability zero."""


class ArityError(ModelError, ValueError):
    pass


def to_rational(value: RationalLike) -> Fraction:
    """Parse ``value`` into a Fraction without ever passing through a float.

    Accepts Fractions, ints, ``"p/q"`` strings, decimal strings (``"0.9"``,
    ``"1e-3"``) and ``(p, q)`` integer pairs.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if _RATIO.match(text) or _DECIMAL.match(text):
            return Fraction(text.replace(" ", ""))
        raise ValueError(f"not a rational literal: {value!r}")
    if isinstance(value, (list, tuple)) and len(value) == 2:
        num, den = value
        if isinstance(num, int) and isinstance(den, int) and not isinstance(num, bool):
            return Fraction(num, den)
    raise TypeError(f"cannot convert {value!r} to an exact rational")


@dataclass(frozen=True, eq=True)
class Question:
    id: str
    signals: tuple[str, ...]
    # (signal, state) -> Q(signal | state)
    conditional: Mapping[tuple[str, str], Fraction]

    def prob(self, signal: str, state: str) -> Fraction:
        return self.conditional.get((signal, state), Fraction(0))


@dataclass(frozen=True, eq=True)
class Advertiser:
    id: str
    base_value: Fraction
    conversion: Mapping[str, Fraction]


@dataclass(frozen=True, eq=True)
class SignalRow:
    """A positive-measure signal of one question with its induced conversion rates."""

    signal: str
    marginal: Fraction
    conversions: tuple[Fraction, ...]


@dataclass(frozen=True, eq=True)
class Instance:
    states: tuple[str, ...]
    prior: Mapping[str, Fraction]
    questions: tuple[Question, ...]
    advertisers: tuple[Advertiser, ...]
    _rows: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @classmethod
    def build(
        cls,
        states: Iterable[str],
        prior: Iterable[RationalLike],
        questions: Iterable[tuple[str, Sequence[str], Sequence[Sequence[RationalLike]]]],
        advertisers: Iterable[tuple[str, RationalLike, Sequence[RationalLike]]],
    ) -> "Instance":
        """Build from positional tables.

        ``questions`` holds ``(id, signals, matrix)`` with ``matrix[s][t]`` the
        probability of signal ``s`` in state ``t``. ``advertisers`` holds
        ``(id, base_value, conversion_per_state)``.
        """
        states = tuple(states)
        prior = [to_rational(p) for p in prior]
        if len(prior) != len(states):
            raise ArityError("prior length must match number of states")
        qs = []
        for qid, signals, matrix in questions:
            signals = tuple(signals)
            if len(matrix) != len(signals) or any(len(r) != len(states) for r in matrix):
                raise ArityError(f"question {qid!r}: conditional must be signals x states")
            cond = {
                (sig, st): to_rational(matrix[a][b])
                for a, sig in enumerate(signals)
                for b, st in enumerate(states)
            }
            qs.append(Question(qid, signals, cond))
        ads = []
        for aid, value, conv in advertisers:
            if len(conv) != len(states):
                raise ArityError(f"advertiser {aid!r}: one conversion rate per state required")
            ads.append(Advertiser(aid, to_rational(value),
                                  {st: to_rational(c) for st, c in zip(states, conv)}))
        return cls(states, dict(zip(states, prior)), tuple(qs), tuple(ads))

    @property
    def n_advertisers(self) -> int:
        return len(self.advertisers)

    @cached_property
    def question_ids(self) -> tuple[str, ...]:
        return tuple(q.id for q in self.questions)

    @cached_property
    def advertiser_ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.advertisers)

    @cached_property
    def base_values(self) -> tuple[Fraction, ...]:
        return tuple(a.base_value for a in self.advertisers)

    def question(self, label: str) -> Question:
        for q in self.questions:
            if q.id == label:
                return q
        raise UnknownLabelError(f"unknown question {label!r}")

    def question_index(self, label: str) -> int:
        try:
            return self.question_ids.index(label)
        except ValueError:
            raise UnknownLabelError(f"unknown question {label!r}") from None

    def rows(self, question: str) -> tuple[SignalRow, ...]:
        """Positive-measure signals of ``question`` with marginals and posterior conversions.

        Memoized per question; the instance itself is never mutated.
        """
        cached = self._rows.get(question)
        if cached is None:
            q = self.question(question)
            out = []
            for sig in q.signals:
                s = _marginal(self, q, sig)
                if s > 0:
                    out.append(SignalRow(sig, s, tuple(
                        _posterior_conversion(self, q, sig, s, adv) for adv in self.advertisers
                    )))
            cached = self._rows[question] = tuple(out)
        return cached

    def check_bids(self, bids: Sequence[Fraction]) -> None:
        if len(bids) != len(self.advertisers):
            raise ArityError(f"expected {len(self.advertisers)} bids, got {len(bids)}")


@dataclass(frozen=True)
class BeliefState:
    question: str
    signal: str
    marginal: Fraction
    posterior: Mapping[str, Fraction]


def _marginal(instance: Instance, q: Question, signal: str) -> Fraction:
    return sum((q.prob(signal, t) * instance.prior[t] for t in instance.states), Fraction(0))


def _posterior_conversion(instance, q, signal, marginal, adv) -> Fraction:
    num = sum((adv.conversion[t] * instance.prior[t] * q.prob(signal, t)
               for t in instance.states), Fraction(0))
    return num / marginal


def _lookup(instance: Instance, question: str, signal: str) -> Question:
    q = instance.question(question)
    if signal not in q.signals:
        raise UnknownLabelError(f"question {question!r} has no signal {signal!r}")
    return q


def validate(instance: Instance) -> list[str]:
    """Return every invariant violation as ``"path: message"``; empty iff valid."""
    out: list[str] = []
    if not instance.states:
        out.append("states: at least one state required")
    if len(set(instance.states)) != len(instance.states):
        out.append("states: duplicate state identifiers")
    if not instance.questions:
        out.append("questions: at least one question required")
    if not instance.advertisers:
        out.append("advertisers: at least one advertiser required")
    if set(instance.prior) != set(instance.states):
        out.append("prior: must be indexed by exactly the instance states")
    for t in instance.states:
        p = instance.prior.get(t)
        if p is not None and p < 0:
            out.append(f"prior[{t}]: negative probability {p}")
    total = sum(instance.prior.values(), Fraction(0))
    if total != 1:
        out.append(f"prior: sums to {total}, expected 1")
    if len(set(instance.question_ids)) != len(instance.questions):
        out.append("questions: duplicate question identifiers")
    for q in instance.questions:
        if not q.signals:
            out.append(f"questions[{q.id}].signals: at least one signal required")
        if len(set(q.signals)) != len(q.signals):
            out.append(f"questions[{q.id}].signals: duplicate signal identifiers")
        expected_keys = {(s, t) for s in q.signals for t in instance.states}
        if set(q.conditional) != expected_keys:
            out.append(f"questions[{q.id}].conditional: rows must cover exactly signals x states")
        for (s, t), p in q.conditional.items():
            if p < 0:
                out.append(f"questions[{q.id}].conditional[{s}|{t}]: negative probability {p}")
        for t in instance.states:
            col = sum((q.prob(s, t) for s in q.signals), Fraction(0))
            if col != 1:
                out.append(f"questions[{q.id}].conditional[*|{t}]: sums to {col}, expected 1")
    if len(set(instance.advertiser_ids)) != len(instance.advertisers):
        out.append("advertisers: duplicate advertiser identifiers")
    for a in instance.advertisers:
        if a.base_value < 0:
            out.append(f"advertisers[{a.id}].base_value: negative value {a.base_value}")
        if set(a.conversion) != set(instance.states):
            out.append(f"advertisers[{a.id}].conversion: must be defined for every state")
        for t, c in a.conversion.items():
            if c < 0:
                out.append(f"advertisers[{a.id}].conversion[{t}]: negative conversion rate {c}")
    return out


def marginal_signal(instance: Instance, question: str, signal: str) -> Fraction:
    """Probability of observing ``signal`` after asking ``question``, under the prior."""
    return _marginal(instance, _lookup(instance, question, signal), signal)


def posterior(instance: Instance, question: str, signal: str) -> BeliefState:
    q = _lookup(instance, question, signal)
    s = _marginal(instance, q, signal)
    if s == 0:
        raise ZeroMeasureSignalError(f"signal {signal!r} of {question!r} has probability 0")
    post = {t: instance.prior[t] * q.prob(signal, t) / s for t in instance.states}
    return BeliefState(question, signal, s, post)


def posterior_conversion(instance: Instance, question: str, signal: str, advertiser: int) -> Fraction:
    q = _lookup(instance, question, signal)
    s = _marginal(instance, q, signal)
    if s == 0:
        raise ZeroMeasureSignalError(f"signal {signal!r} of {question!r} has probability 0")
    return _posterior_conversion(instance, q, signal, s, instance.advertisers[advertiser])


def effective_value(instance: Instance, bids: Sequence[Fraction], question: str,
                    signal: str, advertiser: int) -> Fraction:
    instance.check_bids(bids)
    return bids[advertiser] * posterior_conversion(instance, question, signal, advertiser)


def expected_question_welfare(instance: Instance, bids: Sequence[Fraction], question: str) -> Fraction:
    """Expected best effective value when ``question`` is asked; zero-measure signals skipped."""
    instance.check_bids(bids)
    return sum(
        (row.marginal * max(b * a for b, a in zip(bids, row.conversions)) for row in instance.rows(question)),
        Fraction(0),
    )
