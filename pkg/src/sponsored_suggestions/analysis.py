"""Welfare oracle, deviation search and price-of-anarchy reports."""

from __future__ import annotations

import itertools
from math import lcm
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .direct import DEFAULT_TIES, TiePolicy, run_direct
from .model import Instance
from .modular import Stage1Rule, Strategy, run_modular, run_proxy

ZERO = Fraction(0)
NO_DEVIATION = "no-profitable-deviation-found"
DEVIATION = "deviation-found"


def brute_force_optimal(instance: Instance, values: Optional[Sequence[Fraction]] = None) -> Fraction:
    """Best expected welfare over every (question, signal -> winner) plan.

    Walks the joint state/signal distribution directly, without forming
    posteriors, so it can be used to check ``expected_question_welfare``.
    """
    values = instance.base_values if values is None else values
    best = None
    for q in instance.questions:
        total = ZERO
        for sig in q.signals:
            # joint mass P(state, signal) times each candidate's realized value
            candidates = [ZERO]
            for j, adv in enumerate(instance.advertisers):
                mass = ZERO
                for t in instance.states:
                    mass += instance.prior[t] * q.prob(sig, t) * values[j] * adv.conversion[t]
                candidates.append(mass)
            total += max(candidates)
        best = total if best is None else max(best, total)
    return best


@dataclass(frozen=True)
class DeviationClass:
    """Finite set of unilateral deviations to search.

    ``value_grid[i]`` lists bids for advertiser ``i`` in the direct mechanism
    and at every stage-2 cell. ``stage1_grid[i][q]`` lists its stage-1 bids on
    question ``q``; deviations try every combination across questions.
    ``force_question`` adds, for VCG stage-1, one bid vector per question that
    makes that question win outright.
    """

    value_grid: tuple[tuple[Fraction, ...], ...]
    stage1_grid: Optional[tuple[dict[str, tuple[Fraction, ...]], ...]] = None
    force_question: bool = True


@dataclass(frozen=True)
class AdvertiserDeviation:
    best_deviation_gain: Fraction
    best_deviation: str


@dataclass(frozen=True)
class EquilibriumReport:
    advertisers: tuple[AdvertiserDeviation, ...]
    epsilon: Fraction
    # True when the searched stage-1 class provably covers every payoff-relevant deviation
    stage1_complete: bool = False
    evaluated: int = 0

    @property
    def verdict(self) -> str:
        return DEVIATION if any(a.best_deviation_gain > self.epsilon for a in self.advertisers) else NO_DEVIATION

    @property
    def ok(self) -> bool:
        return self.verdict == NO_DEVIATION

    def witness(self) -> Optional[tuple[int, AdvertiserDeviation]]:
        i = max(range(len(self.advertisers)), key=lambda k: self.advertisers[k].best_deviation_gain)
        a = self.advertisers[i]
        return (i, a) if a.best_deviation_gain > self.epsilon else None


@dataclass(frozen=True)
class PoAReport:
    optimal_welfare: Fraction
    equilibrium_welfare: Fraction
    # None encodes an infinite ratio (zero equilibrium welfare)
    ratio: Optional[Fraction] = field(default=None)

    @property
    def infinite(self) -> bool:
        return self.ratio is None


def value_grid(instance: Instance, multipliers: Sequence[Fraction] = (0, Fraction(1, 2), 1, 2)) -> tuple:
    """Per-advertiser grid ``{c * v_i}``, e.g. ``{0, v/2, v, 2v}``."""
    return tuple(tuple(sorted({Fraction(c) * v for c in multipliers})) for v in instance.base_values)


def _fmt(xs) -> str:
    return "(" + ", ".join(str(x) for x in xs) + ")"


def _track(best: list, gain: Fraction, label: str) -> None:
    if best[0] is None or gain > best[0]:
        best[0], best[1] = gain, label


def _scale(tables) -> int:
    return lcm(*(x.denominator for x in tables)) if tables else 1


def verify_direct_dsic(instance: Instance, deviations: Optional[DeviationClass] = None,
                       epsilon: Fraction = ZERO, ties: TiePolicy = DEFAULT_TIES) -> EquilibriumReport:
    """Check truthful bidding against every grid deviation for every grid opponent profile.

    All opponent profiles are evaluated at once on integer arrays scaled to a
    common denominator, so the check stays exact. Under VCG an advertiser's
    utility is its true value plus the others' reported welfare at the chosen
    outcome, minus a term that does not depend on its own bid; only that
    difference is computed.
    """
    deviations = deviations or DeviationClass(value_grid(instance))
    grids = deviations.value_grid
    truth = instance.base_values
    n = instance.n_advertisers
    q_order = ties.question_order(instance)
    a_rank = {j: r for r, j in enumerate(ties.advertiser_order(instance))}
    cells = [(k, row) for k, q in enumerate(instance.question_ids) for row in instance.rows(q)]
    out = []
    count = 0
    for i in range(n):
        others = [j for j in range(n) if j != i]
        sizes = [len(grids[j]) for j in others]
        own = list(grids[i])
        if not own or 0 in sizes:
            out.append(AdvertiserDeviation(ZERO, "none"))
            continue
        # reported contribution S(sig) * b * alpha for every cell/advertiser/level
        opp = [[[row.marginal * b * row.conversions[j] for b in grids[j]] for j in others] for _, row in cells]
        dev = [[row.marginal * b * row.conversions[i] for b in own] for _, row in cells]
        true = [row.marginal * truth[i] * row.conversions[i] for _, row in cells]
        flat = [x for c in opp for t in c for x in t] + [x for c in dev for x in c] + true
        scale = _scale(flat)
        top = max((abs(x) * scale for x in flat), default=0) * (len(cells) + 1)
        dtype = np.int64 if top < 2 ** 62 else object
        ints = lambda xs: np.array([int(x * scale) for x in xs], dtype=dtype)
        idx = np.indices(sizes).reshape(len(others), -1) if others else np.zeros((0, 1), dtype=int)
        n_prof = idx.shape[1]

        best_other, other_rank = [], []
        for c in range(len(cells)):
            vals = [ints(opp[c][k])[idx[k]] for k in range(len(others))]
            m = np.maximum.reduce(vals) if vals else np.zeros(n_prof, dtype=dtype)
            r = np.full(n_prof, n, dtype=int)
            for k, j in enumerate(others):
                r = np.where((vals[k] == m) & (r > a_rank[j]), a_rank[j], r)
            best_other.append(m)
            other_rank.append(r)
        true_i = [int(x * scale) for x in true]

        def objective(bid_cells: list[int]):
            welfare = [np.zeros(n_prof, dtype=dtype) for _ in instance.questions]
            wins = []
            for c, (k, _) in enumerate(cells):
                b, m = bid_cells[c], best_other[c]
                wins.append((b > m) | ((b == m) & (b > 0) & (a_rank[i] < other_rank[c])))
                welfare[k] = welfare[k] + np.maximum(m, b)
            chosen = np.full(n_prof, q_order[0], dtype=int)
            level = welfare[q_order[0]]
            for k in q_order[1:]:
                better = welfare[k] > level
                chosen = np.where(better, k, chosen)
                level = np.where(better, welfare[k], level)
            total = np.zeros(n_prof, dtype=dtype)
            for c, (k, _) in enumerate(cells):
                total = total + np.where(chosen == k, np.where(wins[c], true_i[c], best_other[c]), 0)
            return total

        base = objective(true_i)
        best = [None, "none"]
        for d, b in enumerate(own):
            gain = objective([int(dev[c][d] * scale) for c in range(len(cells))]) - base
            count += n_prof
            p = int(np.argmax(gain))
            profile = tuple(grids[j][idx[k][p]] for k, j in enumerate(others))
            _track(best, Fraction(int(gain[p]), scale), f"bid {b} instead of {truth[i]} against {_fmt(profile)}")
        out.append(AdvertiserDeviation(best[0], best[1]))
    return EquilibriumReport(tuple(out), Fraction(epsilon), False, count)


def _with(profile: Sequence[Strategy], i: int, strategy: Strategy) -> list[Strategy]:
    new = list(profile)
    new[i] = strategy
    return new


def forcing_bids(instance: Instance, profile: Sequence[Strategy], i: int) -> dict[str, dict[str, Fraction]]:
    """For each question, a stage-1 bid vector for ``i`` that makes it the unique top total."""
    ids = instance.question_ids
    rest = {q: sum((s.stage1[q] for j, s in enumerate(profile) if j != i), ZERO) for q in ids}
    top = max(rest.values())
    return {q: {p: (top - rest[q] + 1 if p == q else ZERO) for p in ids} for q in ids}


def default_deviations(instance: Instance, profile: Optional[Sequence[Strategy]] = None,
                       eta: Optional[Fraction] = None,
                       multipliers: Sequence[Fraction] = (0, Fraction(1, 2), 1, 2)) -> DeviationClass:
    """Grid of payoff-relevant thresholds.

    Stage-1 levels for advertiser ``i`` on question ``q``: 0, every stage-1 bid
    in the profile, the level at which ``q``'s total ties the current best
    total, and eta-perturbations and midpoints of all of these.
    """
    values = value_grid(instance, multipliers)
    if profile is None:
        return DeviationClass(values)
    ids = instance.question_ids
    bids = sorted({s.stage1[q] for s in profile for q in ids} | {ZERO})
    if eta is None:
        positive = [b for b in bids if b > 0] + [v for v in instance.base_values if v > 0]
        eta = (min(positive) if positive else Fraction(1)) / 1000
    stage1 = []
    for i, own in enumerate(profile):
        totals = {q: sum((s.stage1[q] for s in profile), ZERO) for q in ids}
        per_q = {}
        for q in ids:
            rest = totals[q] - own.stage1[q]
            tie = max(totals[p] for p in ids if p != q) - rest if len(ids) > 1 else ZERO
            core = set(bids) | {max(tie, ZERO)}
            levels = set(core)
            for x in core:
                levels |= {x + eta, max(x - eta, ZERO)}
            srt = sorted(core)
            levels |= {(a + b) / 2 for a, b in zip(srt, srt[1:])}
            per_q[q] = tuple(sorted(levels))
        stage1.append(per_q)
    return DeviationClass(values, tuple(stage1), True)


def verify_modular_nash(instance: Instance, profile: Sequence[Strategy], rule: Stage1Rule,
                        true_values: Optional[Sequence[Fraction]] = None,
                        deviations: Optional[DeviationClass] = None,
                        epsilon: Fraction = ZERO) -> EquilibriumReport:
    """Best unilateral gain over stage-2 cell deviations, stage-1 grid vectors and forcing bids.

    Stage-2 cells are varied one at a time with everything else held fixed;
    since the stage-2 auction is a per-signal second-price auction, joint
    stage-1/stage-2 deviations cannot beat the same stage-1 bids with truthful
    stage-2 bids.
    """
    deviations = deviations or default_deviations(instance, profile)
    values = instance.base_values if true_values is None else tuple(true_values)
    base = run_modular(instance, profile, rule, values).expected_utility
    ids = instance.question_ids
    out = []
    count = 0
    for i, own in enumerate(profile):
        best = [None, "none"]

        def gain_of(strategy: Strategy) -> Fraction:
            nonlocal count
            count += 1
            return run_modular(instance, _with(profile, i, strategy), rule, values).expected_utility[i] - base[i]

        for q in ids:
            for row in instance.rows(q):
                cell = (q, row.signal)
                for level in deviations.value_grid[i]:
                    if level == own.stage2[cell]:
                        continue
                    stage2 = dict(own.stage2)
                    stage2[cell] = level
                    _track(best, gain_of(replace(own, stage2=stage2)),
                           f"stage-2 bid {level} at ({q}, {row.signal})")
        if deviations.stage1_grid is not None:
            grid = deviations.stage1_grid[i]
            for combo in itertools.product(*(grid[q] for q in ids)):
                vec = dict(zip(ids, combo))
                _track(best, gain_of(replace(own, stage1=vec)), f"stage-1 bids {_fmt(combo)}")
        if rule.variant == "vcg" and deviations.force_question:
            for q, vec in forcing_bids(instance, profile, i).items():
                _track(best, gain_of(replace(own, stage1=vec)), f"force question {q}")
        out.append(AdvertiserDeviation(best[0] if best[0] is not None else ZERO, best[1]))
    complete = rule.variant == "vcg" and deviations.force_question
    return EquilibriumReport(tuple(out), Fraction(epsilon), complete, count)


def verify_proxy(instance: Instance, report_grid: Sequence[Fraction],
                 true_values: Optional[Sequence[Fraction]] = None, epsilon: Fraction = ZERO,
                 ties: TiePolicy = DEFAULT_TIES) -> EquilibriumReport:
    """Check truthful reporting to the proxy against single-advertiser misreports from ``report_grid``."""
    values = instance.base_values if true_values is None else tuple(true_values)
    base = run_proxy(instance, values, values, ties).expected_utility
    out = []
    count = 0
    for i in range(instance.n_advertisers):
        best = [None, "none"]
        for r in report_grid:
            r = Fraction(r)
            if r == values[i]:
                continue
            reports = list(values)
            reports[i] = r
            count += 1
            gain = run_proxy(instance, reports, values, ties).expected_utility[i] - base[i]
            _track(best, gain, f"report {r} instead of {values[i]}")
        out.append(AdvertiserDeviation(best[0] if best[0] is not None else ZERO, best[1]))
    return EquilibriumReport(tuple(out), Fraction(epsilon), False, count)


def poa(instance: Instance, profile: Sequence[Strategy], rule: Stage1Rule,
        true_values: Optional[Sequence[Fraction]] = None) -> PoAReport:
    values = instance.base_values if true_values is None else tuple(true_values)
    opt = brute_force_optimal(instance, values)
    eq = run_modular(instance, profile, rule, values).expected_welfare
    return PoAReport(opt, eq, opt / eq if eq > 0 else None)
