import math
import random
from collections import Counter
from fractions import Fraction as F

import pytest

from sponsored_suggestions import (
    Instance, TiePolicy, allocate, decompose_payment, gen_poa_instance, gen_proxy_counterexample,
    random_instance, run_direct,
    sample_trajectories, sample_trajectory, select_question, welfare_without,
)
from sponsored_suggestions.model import ArityError

TRUTH = (F(50), F(30))


def test_select_question_running_shoes(shoes):
    assert select_question(shoes, TRUTH) == "terr"


def test_select_question_poa_instance():
    inst = gen_poa_instance(3, F(1, 9))
    assert select_question(inst, inst.base_values) == "q1"


def test_allocation_running_shoes(shoes):
    assert allocate(shoes, TRUTH, "terr", "click") == 0
    assert allocate(shoes, TRUTH, "terr", "no-click") == 1


def test_allocation_nobody_when_all_effective_bids_zero(shoes):
    assert allocate(shoes, (F(0), F(0)), "terr", "click") is None


def test_run_direct_running_shoes(shoes):
    out = run_direct(shoes, TRUTH)
    assert out.chosen_question == "terr"
    assert out.expected_welfare == 24
    assert out.expected_payment == (0, 0)
    assert out.expected_utility == (15, 9)
    assert tuple(v * x for v, x in zip(TRUTH, out.expected_delivered_conversion)) == (15, 9)
    assert out.per_signal["click"].winner == 0
    assert out.per_signal["click"].winner_effective_value == 30
    assert out.per_signal["no-click"].winner == 1


def test_welfare_without(shoes):
    # alone, advertiser 1 still collects 15 under terr and only 27/4 under tgt
    assert welfare_without(shoes, TRUTH, 1) == 15
    assert welfare_without(shoes, TRUTH, 0) == 9


def test_decomposition_running_shoes(shoes):
    dec = decompose_payment(shoes, TRUTH)
    assert dec.totals == (0, 0)
    assert all(s.stage1_externality == 0 and s.expected_second_price == 0 for s in dec.shares)


def test_decomposition_second_price_part():
    inst = gen_proxy_counterexample()
    out = run_direct(inst, inst.base_values)
    dec = decompose_payment(inst, inst.base_values)
    assert out.expected_payment == (2, 0, 1)
    assert dec.totals == out.expected_payment
    assert [s.stage1_externality for s in dec.shares] == [0, 0, 0]


def test_decomposition_question_externality_part():
    # seed 131 happens to give an advertiser whose presence changes the question
    inst = random_instance(random.Random(131))
    out = run_direct(inst, inst.base_values)
    dec = decompose_payment(inst, inst.base_values)
    assert dec.shares[2].stage1_externality == F(1, 2)
    assert dec.totals == out.expected_payment


def test_single_advertiser_pays_nothing():
    inst = Instance.build(("a", "b"), ["1/3", "2/3"], [("q", ("x", "y"), [[1, 0], [0, 1]])],
                          [("only", 12, ["0.9", "0.1"])])
    out = run_direct(inst, inst.base_values)
    assert out.expected_payment == (0,)
    assert out.expected_utility == (F(12) * (F(3, 10) + F(1, 15)),)


def test_tie_policy_controls_question_and_winner():
    inst = Instance.build(("s",), ["1"], [("p", ("x",), [[1]]), ("q", ("x",), [[1]])],
                          [("a", 1, [1]), ("b", 1, [1])])
    bids = (F(1), F(1))
    assert select_question(inst, bids) == "p"
    assert select_question(inst, bids, TiePolicy(questions=("q",))) == "q"
    assert allocate(inst, bids, "p", "x") == 0
    assert allocate(inst, bids, "p", "x", TiePolicy(advertisers=("b",))) == 1
    assert TiePolicy.from_labels(inst, ["q", "b"]) == TiePolicy(("q",), ("b",))


def test_bad_bids(shoes):
    with pytest.raises(ArityError):
        run_direct(shoes, (F(1),))
    with pytest.raises(ValueError):
        run_direct(shoes, (F(-1), F(1)))


def test_sampling_is_deterministic(shoes):
    assert sample_trajectory(shoes, TRUTH, seed=11) == sample_trajectory(shoes, TRUTH, seed=11)
    runs = sample_trajectories(shoes, TRUTH, range(50))
    assert {t.question for t in runs} == {"terr"}
    assert all(t.winner == (0 if t.signal == "click" else 1) for t in runs)
    assert all(t.signal == ("click" if t.state[0] == "1" else "no-click") for t in runs)


def test_sampling_deterministic_instance_has_unique_trajectory():
    inst = Instance.build(("s",), ["1"], [("q", ("x",), [[1]])], [("a", 2, ["1/2"])])
    records = {(t.state, t.signal, t.winner, t.second_price) for t in sample_trajectories(inst, [F(2)], range(20))}
    assert records == {("s", "x", 0, 0)}


def test_sampling_frequencies_match_signal_probabilities(shoes):
    n = 100_000
    counts = Counter(t.winner for t in sample_trajectories(shoes, TRUTH, range(n)))
    se = math.sqrt(0.25 / n)
    assert abs(counts[0] / n - 0.5) < 3 * se
    assert abs(counts[1] / n - 0.5) < 3 * se
