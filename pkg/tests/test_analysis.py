import itertools
import random
from fractions import Fraction as F

import pytest

from sponsored_suggestions import (
    DeviationClass, Instance, Stage1Rule, Strategy, TiePolicy, brute_force_optimal, default_deviations,
    expected_question_welfare, gen_poa_instance, gen_proxy_counterexample, poa, prescribed_equilibrium,
    random_instance, run_direct, verify_direct_dsic, verify_modular_nash, verify_proxy,
)
from sponsored_suggestions.analysis import forcing_bids, value_grid
from sponsored_suggestions.instances import pay_your_bid_profile
from sponsored_suggestions.modular import run_modular, truthful_stage2

TRUTH = (F(50), F(30))
Q2_FIRST = TiePolicy(questions=("q2",))


def reference_gains(inst, grids, ties=TiePolicy()):
    """Best deviation gain per advertiser, by calling run_direct on every profile."""
    truth = inst.base_values
    out = []
    for i in range(inst.n_advertisers):
        best = None
        others = [grids[j] for j in range(inst.n_advertisers) if j != i]
        for opp in itertools.product(*others):
            bids = list(opp[:i]) + [truth[i]] + list(opp[i:])
            base = run_direct(inst, bids, ties).expected_utility[i]
            for b in grids[i]:
                bids[i] = b
                gain = run_direct(inst, bids, ties).expected_utility[i] - base
                best = gain if best is None or gain > best else best
        out.append(best)
    return out


def test_brute_force_optimal(shoes):
    assert brute_force_optimal(shoes) == 24
    assert brute_force_optimal(gen_poa_instance(3, F(1, 9))) == 1


def test_brute_force_matches_question_welfare_on_random_instances():
    for seed in range(40):
        inst = random_instance(random.Random(seed))
        best = max(expected_question_welfare(inst, inst.base_values, q) for q in inst.question_ids)
        assert brute_force_optimal(inst) == best


def test_direct_dsic_examples(shoes):
    grid = tuple(F(x) for x in (0, 10, 30, 50, 100))
    assert verify_direct_dsic(shoes, DeviationClass((grid, grid))).ok
    inst = gen_poa_instance(3, F(1, 9))
    grid = (F(0), F(1), F(2))
    assert verify_direct_dsic(inst, DeviationClass((grid,) * 3)).ok
    solo = Instance.build(("s",), ["1"], [("q", ("x",), [[1]])], [("a", 3, ["1/2"])])
    assert verify_direct_dsic(solo).ok


def test_direct_dsic_counts_every_pair(shoes):
    rep = verify_direct_dsic(shoes)
    assert rep.evaluated == 2 * 4 * 4
    assert rep.verdict == "no-profitable-deviation-found"


@pytest.mark.parametrize("seed", range(25))
def test_fast_dsic_agrees_with_run_direct(seed):
    inst = random_instance(random.Random(seed), max_advertisers=3)
    grids = tuple(tuple(sorted(set(g) | {F(1, 3), F(2)})) for g in value_grid(inst))
    reversed_ties = TiePolicy(tuple(reversed(inst.question_ids)), tuple(reversed(inst.advertiser_ids)))
    for ties in (TiePolicy(), reversed_ties):
        rep = verify_direct_dsic(inst, DeviationClass(grids), 0, ties)
        assert [a.best_deviation_gain for a in rep.advertisers] == reference_gains(inst, grids, ties)


def test_single_signal_instance_has_no_profitable_misreport():
    inst = Instance.build(("s",), ["1"], [("q", ("x",), [[1]])], [("a", 10, [1]), ("b", 4, [1])])
    grids = ((F(0), F(5), F(10)), (F(0), F(4)))
    rep = verify_direct_dsic(inst, DeviationClass(grids))
    assert rep.ok
    report = verify_proxy(inst, [F(0), F(3), F(20)])
    assert report.ok


def test_modular_nash_running_shoes(shoes):
    rep = verify_modular_nash(shoes, prescribed_equilibrium(shoes), Stage1Rule("vcg"))
    assert rep.ok and rep.stage1_complete
    assert rep.witness() is None


def test_modular_nash_finds_overbid_in_worked_profile(shoes):
    profile = (
        Strategy({"terr": F(21), "tgt": F(20)}, truthful_stage2(shoes, TRUTH, 0)),
        Strategy({"terr": F(9), "tgt": F(12)}, truthful_stage2(shoes, TRUTH, 1)),
    )
    rep = verify_modular_nash(shoes, profile, Stage1Rule("vcg"))
    assert rep.verdict == "deviation-found"
    assert rep.witness() is not None


def test_forcing_bids_make_each_question_win(shoes):
    profile = prescribed_equilibrium(shoes)
    for q, vec in forcing_bids(shoes, profile, 1).items():
        forced = list(profile)
        forced[1] = Strategy(vec, profile[1].stage2)
        assert run_modular(shoes, forced, Stage1Rule("vcg")).chosen_question == q


def test_default_deviation_levels_include_tie_threshold():
    inst = gen_poa_instance(3, F(1, 9))
    profile = pay_your_bid_profile(3, F(1, 9), rival_bid=F(1, 27))
    dev = default_deviations(inst, profile)
    # advertiser 1 can match the q1 total of 2/27 on q2
    assert F(2, 27) in dev.stage1_grid[0]["q2"]


def test_pay_your_bid_profile_passes():
    inst = gen_poa_instance(3, F(1, 9))
    profile = pay_your_bid_profile(3, F(1, 9))
    for variant in ("first_price", "all_pay"):
        rep = verify_modular_nash(inst, profile, Stage1Rule(variant, Q2_FIRST))
        assert rep.ok
        assert not rep.stage1_complete


def test_pay_your_bid_with_smaller_rival_bids_is_beaten():
    inst = gen_poa_instance(3, F(1, 9))
    profile = pay_your_bid_profile(3, F(1, 9), rival_bid=F(1, 27))
    rep = verify_modular_nash(inst, profile, Stage1Rule("first_price", Q2_FIRST))
    assert rep.verdict == "deviation-found"
    i, dev = rep.witness()
    assert i == 0 and dev.best_deviation_gain == F(1, 27)


def test_proxy_deviation_found():
    inst = gen_proxy_counterexample()
    rep = verify_proxy(inst, [F(10), F(20)])
    assert rep.verdict == "deviation-found"
    i, dev = rep.witness()
    assert i == 1 and dev.best_deviation_gain == 1


def test_poa_report():
    inst = gen_poa_instance(3, F(1, 9))
    rep = poa(inst, prescribed_equilibrium(inst), Stage1Rule("vcg"))
    assert (rep.optimal_welfare, rep.equilibrium_welfare, rep.ratio) == (1, F(25, 27), F(27, 25))
    assert not rep.infinite


def test_poa_infinite_when_equilibrium_welfare_zero():
    inst = Instance.build(("s",), ["1"], [("q", ("x",), [[1]])], [("a", 2, ["1/2"])])
    zero = (Strategy({"q": F(0)}, {("q", "x"): F(0)}),)
    rep = poa(inst, zero, Stage1Rule("vcg"))
    assert rep.infinite and rep.optimal_welfare == 1
