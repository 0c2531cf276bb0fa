"""Named instance families and a seeded random-instance generator."""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Optional

from .modular import Strategy, StrategyProfile, truthful_stage2
from .model import Instance

F = Fraction


def gen_running_shoes() -> Instance:
    """Two advertisers selling trail and road shoes; state = (trail?, experienced?).

    ``terr`` reveals the terrain coordinate; ``tgt`` only fires for
    experienced trail runners.
    """
    states = ("00", "01", "10", "11")  # (terrain, experience)
    quarter = F(1, 4)
    return Instance.build(
        states,
        [quarter] * 4,
        [
            ("terr", ("click", "no-click"), [[0, 0, 1, 1], [1, 1, 0, 0]]),
            ("tgt", ("click", "no-click"), [[0, 0, 0, 1], [1, 1, 1, 0]]),
        ],
        [
            ("a1", 50, ["0", "0", "0.3", "0.9"]),
            ("a2", 30, ["0.8", "0.4", "0", "0"]),
        ],
    )


def gen_poa_instance(m: int, delta: Fraction) -> Instance:
    """Cyclic primary/secondary construction on ``m`` states.

    ``q1`` reveals the state, ``q2`` is uninformative. Advertiser ``i`` converts
    fully in state ``i`` and at rate ``1 - delta`` in state ``i + 1`` (advertiser
    ``m`` covers state 1). State 3 is special: its runner-up is advertiser 1,
    and advertiser 2 gets nothing there.
    """
    delta = F(delta)
    if not isinstance(m, int) or m < 3:
        raise ValueError("m must be an integer >= 3")
    if not 0 < delta < 1:
        raise ValueError("delta must lie strictly between 0 and 1")
    states = tuple(f"t{t}" for t in range(1, m + 1))
    alpha = [[F(0)] * m for _ in range(m)]  # alpha[advertiser][state], 0-based
    for t in range(m):
        alpha[t][t] = F(1)
        alpha[(t - 1) % m][t] = 1 - delta
    alpha[0][2] = 1 - delta
    alpha[1][2] = F(0)
    identity = [[int(s == t) for t in range(m)] for s in range(m)]
    return Instance.build(
        states,
        [F(1, m)] * m,
        [
            ("q1", tuple(f"s{t}" for t in range(1, m + 1)), identity),
            ("q2", ("s*",), [[1] * m]),
        ],
        [(f"a{i + 1}", 1, alpha[i]) for i in range(m)],
    )


def gen_proxy_counterexample(realizable: bool = True) -> Instance:
    """An instance where truthful reporting to a bid-on-your-behalf proxy is not an equilibrium.

    The default is a genuine Bayesian instance: three advertisers with base
    value 10, four equally likely states ``xy``; question ``A`` reveals ``x``
    and ``B`` reveals ``y``. Truthful reports select ``B`` and leave
    advertiser 2 with nothing; reporting 20 instead flips the choice to ``A``
    and earns advertiser 2 a true expected utility of 1.

    With ``realizable=False`` the result instead encodes the two-advertiser
    table A: (0.6, 0) | (0, 0.8), B: (1, 0.4) | (1, 0), each signal with
    probability 1/2. No prior can produce that table, because the
    signal-weighted mean conversion rate must be the same for both questions.
    The encoding uses question-specific states whose signal rows do not sum to
    one, so ``validate`` rejects it. It exists only to replay that arithmetic.
    """
    if realizable:
        states = ("00", "01", "10", "11")
        return Instance.build(
            states,
            [F(1, 4)] * 4,
            [
                ("A", ("x0", "x1"), [[1, 1, 0, 0], [0, 0, 1, 1]]),
                ("B", ("y0", "y1"), [[1, 0, 1, 0], [0, 1, 0, 1]]),
            ],
            [
                ("a1", 10, ["0", "0.4", "0", "0.8"]),
                ("a2", 10, ["0", "0", "0.4", "0.8"]),
                ("a3", 10, ["0.8", "0", "0.4", "0"]),
            ],
        )
    states = ("A0", "A1", "B0", "B1")
    return Instance.build(
        states,
        [F(1, 4)] * 4,
        [
            ("A", ("x0", "x1"), [[2, 0, 0, 0], [0, 2, 0, 0]]),
            ("B", ("y0", "y1"), [[0, 0, 2, 0], [0, 0, 0, 2]]),
        ],
        [
            ("a1", 10, ["0.6", "0", "1", "1"]),
            ("a2", 10, ["0", "0.8", "0.4", "0"]),
        ],
    )


def pay_your_bid_profile(m: int, delta: Fraction, rival_bid: Optional[Fraction] = None) -> StrategyProfile:
    """Stage-1 profile on ``gen_poa_instance(m, delta)`` for first-price or all-pay payments.

    Advertiser 1 bids ``delta`` on the uninformative ``q2``; everyone else bids
    ``rival_bid`` on ``q1`` so that both totals equal ``delta`` and the tie
    goes to ``q2``. Stage-2 bids are truthful (base value 1).

    ``rival_bid`` defaults to ``delta / (m - 1)``. Passing ``delta / m`` leaves
    the ``q1`` total at ``(m - 1) delta / m``, which lets advertiser 1 shade its
    bid down to that total and still win; ``verify_modular_nash`` with the
    default deviation grid finds that deviation.
    """
    delta = F(delta)
    if not isinstance(m, int) or m < 3:
        raise ValueError("m must be an integer >= 3")
    if not 0 < delta < F(1, m + 2):
        raise ValueError(f"delta must lie in (0, 1/(m+2)) = (0, {F(1, m + 2)}), got {delta}")
    rival = delta / (m - 1) if rival_bid is None else F(rival_bid)
    instance = gen_poa_instance(m, delta)
    values = instance.base_values
    profile = [Strategy({"q1": F(0), "q2": delta}, truthful_stage2(instance, values, 0))]
    for i in range(1, m):
        profile.append(Strategy({"q1": rival, "q2": F(0)}, truthful_stage2(instance, values, i)))
    return tuple(profile)


_GRID = (F(0), F(1, 4), F(1, 3), F(1, 2), F(2, 3), F(3, 4), F(1))
_VALUES = (F(0), F(1), F(2), F(3), F(5), F(10), F(1, 2), F(5, 2))


def random_instance(rng: random.Random, max_states: int = 4, max_questions: int = 3,
                    max_advertisers: int = 4, max_signals: int = 3) -> Instance:
    """Small instance with parameters drawn from a coarse rational grid.

    Signal rows are random integer weights normalized per state, so every
    generated instance is valid.
    """
    n_states = rng.randint(1, max_states)
    states = tuple(f"t{t}" for t in range(n_states))
    weights = [rng.randint(0, 3) for _ in states]
    if not any(weights):
        weights[rng.randrange(n_states)] = 1
    prior = [F(w, sum(weights)) for w in weights]

    questions = []
    for q in range(rng.randint(1, max_questions)):
        signals = tuple(f"s{s}" for s in range(rng.randint(1, max_signals)))
        cols = []
        for _ in states:
            w = [rng.randint(0, 2) for _ in signals]
            if not any(w):
                w[rng.randrange(len(signals))] = 1
            cols.append([F(x, sum(w)) for x in w])
        matrix = [[cols[t][s] for t in range(n_states)] for s in range(len(signals))]
        questions.append((f"q{q}", signals, matrix))

    advertisers = [
        (f"a{i}", rng.choice(_VALUES[1:]), [rng.choice(_GRID) for _ in states])
        for i in range(rng.randint(1, max_advertisers))
    ]
    return Instance.build(states, prior, questions, advertisers)
