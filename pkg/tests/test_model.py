from fractions import Fraction as F

import pytest

from sponsored_suggestions import (
    Instance, effective_value, expected_question_welfare, marginal_signal, posterior,
    posterior_conversion, to_rational, validate,
)
from sponsored_suggestions.model import ArityError, UnknownLabelError, ZeroMeasureSignalError


@pytest.mark.parametrize("text, expected", [
    ("3/10", F(3, 10)), ("0.3", F(3, 10)), ("50", F(50)), (" 1 / 4 ", F(1, 4)),
    ("1e-3", F(1, 1000)), (7, F(7)), ((2, 6), F(1, 3)), (F(5, 2), F(5, 2)),
])
def test_to_rational_accepts_exact_forms(text, expected):
    assert to_rational(text) == expected


@pytest.mark.parametrize("bad", [0.3, True, "abc", "1/x", [1, 2, 3]])
def test_to_rational_rejects_inexact_or_garbage(bad):
    with pytest.raises((TypeError, ValueError)):
        to_rational(bad)


def test_marginals(shoes):
    assert marginal_signal(shoes, "terr", "click") == F(1, 2)
    assert marginal_signal(shoes, "terr", "no-click") == F(1, 2)
    assert marginal_signal(shoes, "tgt", "click") == F(1, 4)
    assert marginal_signal(shoes, "tgt", "no-click") == F(3, 4)


def test_posteriors(shoes):
    assert posterior(shoes, "terr", "click").posterior == {"00": 0, "01": 0, "10": F(1, 2), "11": F(1, 2)}
    assert posterior(shoes, "tgt", "click").posterior == {"00": 0, "01": 0, "10": 0, "11": 1}
    assert sum(posterior(shoes, "tgt", "no-click").posterior.values()) == 1


def test_posterior_conversion(shoes):
    assert posterior_conversion(shoes, "terr", "click", 0) == F(3, 5)
    assert posterior_conversion(shoes, "tgt", "no-click", 1) == F(2, 5)
    assert posterior_conversion(shoes, "terr", "no-click", 1) == F(3, 5)
    assert posterior_conversion(shoes, "tgt", "no-click", 0) == F(1, 10)


def test_effective_values(shoes):
    bids = (F(50), F(30))
    assert effective_value(shoes, bids, "terr", "click", 0) == 30
    assert effective_value(shoes, bids, "tgt", "no-click", 0) == 5
    assert effective_value(shoes, bids, "tgt", "no-click", 1) == 12


def test_question_welfare(shoes):
    bids = (F(50), F(30))
    assert expected_question_welfare(shoes, bids, "terr") == 24
    assert expected_question_welfare(shoes, bids, "tgt") == F(81, 4)


def _zero_signal_instance():
    return Instance.build(
        ("a", "b"), ["1", "0"],
        [("q", ("x", "y"), [[1, 0], [0, 1]])],
        [("ad", 1, [1, 1])],
    )


def test_zero_measure_signal():
    inst = _zero_signal_instance()
    assert marginal_signal(inst, "q", "y") == 0
    with pytest.raises(ZeroMeasureSignalError):
        posterior(inst, "q", "y")
    with pytest.raises(ZeroMeasureSignalError):
        posterior_conversion(inst, "q", "y", 0)
    assert [r.signal for r in inst.rows("q")] == ["x"]
    assert expected_question_welfare(inst, [F(2)], "q") == 2


def test_unknown_labels(shoes):
    with pytest.raises(UnknownLabelError):
        marginal_signal(shoes, "nope", "click")
    with pytest.raises(UnknownLabelError):
        posterior(shoes, "terr", "maybe")


def test_arity_errors(shoes):
    with pytest.raises(ArityError):
        expected_question_welfare(shoes, [F(1)], "terr")
    with pytest.raises(ArityError):
        Instance.build(("a",), ["1/2", "1/2"], [], [])


def test_validate_accepts_generated_instances(shoes):
    assert validate(shoes) == []


def test_validate_reports_each_violation():
    inst = Instance.build(
        ("a", "b"), ["1/2", "1/3"],
        [("q", ("s", "t"), [["1/2", 1], ["1/4", 0]]), ("q", ("s",), [[1, 1]])],
        [("x", -1, ["1/2", "-1/2"])],
    )
    problems = validate(inst)
    assert "prior: sums to 5/6, expected 1" in problems
    assert any(p.startswith("questions[q].conditional[*|a]") for p in problems)
    assert "questions: duplicate question identifiers" in problems
    assert any("negative value" in p for p in problems)
    assert any("negative conversion rate" in p for p in problems)


def test_instances_are_immutable(shoes):
    with pytest.raises(AttributeError):
        shoes.states = ()
