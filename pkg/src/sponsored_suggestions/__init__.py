"""Exact-arithmetic auctions for sponsored suggestions in conversational search."""

from .model import (
    Advertiser, BeliefState, Instance, Question, validate, marginal_signal, posterior,
    posterior_conversion, effective_value, expected_question_welfare, to_rational,
)
from .direct import (
    TiePolicy, DirectOutcome, PaymentDecomposition, select_question, allocate, welfare_without,
    run_direct, decompose_payment, sample_trajectory, sample_trajectories,
)
from .modular import (
    Strategy, Stage1Rule, ModularOutcome, stage2_auction, stage2_expected_utility, stage1_vcg,
    stage1_first_price, stage1_all_pay, run_modular, prescribed_equilibrium, run_proxy,
)
from .analysis import (
    DeviationClass, EquilibriumReport, PoAReport, brute_force_optimal, verify_direct_dsic,
    verify_modular_nash, verify_proxy, poa, default_deviations,
)
from .instances import (
    gen_running_shoes, gen_poa_instance, gen_proxy_counterexample, pay_your_bid_profile,
    random_instance,
)

__version__ = "0.1.0"
