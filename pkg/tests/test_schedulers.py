"""Tests for schedulers module."""

import math

import pytest

from errors import ConfigurationError, ScheduleDomainError
from schedulers import (
    RESNET_STEP_DECAY,
    Constant,
    Cosine,
    ExponentialDecay,
    Htd,
    LearningRateCurve,
    StepDecay,
    TwoStageExponential,
    curve,
    curve_to_csv,
    describe,
    evaluate,
    evaluate_progress,
    final_rate,
    parse_schedule_arg,
    schedule_from_dict,
    schedule_to_dict,
    step_decay_for_horizon,
    with_horizon,
    write_curve_csv,
)


def _resnet_table(epoch_1_based: int) -> float:
    """Piecewise definition with 1-based half-open intervals."""
    if epoch_1_based <= 81:
        return 0.1
    if epoch_1_based <= 122:
        return 0.01
    return 0.001


def test_step_decay_midrun_value():
    """Step decay returns the rate of the last milestone reached."""
    assert evaluate(RESNET_STEP_DECAY, 50, 200) == 0.1
    assert evaluate(RESNET_STEP_DECAY, 81, 200) == 0.01
    assert evaluate(RESNET_STEP_DECAY, 200, 200) == 0.001


def test_step_decay_matches_one_based_table():
    """0-based epoch t carries the rate of 1-based epoch t + 1 in the classic table."""
    lr_curve = curve(RESNET_STEP_DECAY, 200)
    for t, rate in lr_curve.samples:
        assert rate == _resnet_table(t + 1)
    assert set(lr_curve.rates) == {0.1, 0.01, 0.001}


def test_cosine_midpoint_and_endpoints():
    """Cosine hits lr_max, the midpoint and lr_min exactly."""
    spec = Cosine(lr_min=0.0, lr_max=0.1, horizon=200)
    assert evaluate(spec, 0, 200) == 0.1
    assert evaluate(spec, 100, 200) == pytest.approx(0.05, abs=1e-15)
    assert evaluate(spec, 200, 200) == 0.0
    assert final_rate(spec, 200) == 0.0


def test_cosine_endpoints_exact_with_nonzero_minimum():
    """Endpoint exactness holds for an arbitrary lr_min."""
    spec = Cosine(lr_min=0.01, lr_max=0.1, horizon=37)
    assert evaluate(spec, 0, 37) == 0.1
    assert evaluate(spec, 37, 37) == 0.01


def test_htd_final_rates():
    """final_rate of HTD(-2U, U) equals 0.05 * (1 - tanh U)."""
    expected = {2.0: 1.7986e-3, 3.0: 2.4726e-4, 4.0: 3.3535e-5}
    for upper, approx_value in expected.items():
        spec = Htd(-2 * upper, upper, 0.0, 0.1, 200)
        value = final_rate(spec, 200)
        assert value == pytest.approx(0.05 * (1 - math.tanh(upper)), rel=1e-10)
        assert value == pytest.approx(approx_value, rel=1e-4)


def test_htd_symmetric_midpoint():
    """HTD(-U, U) sits halfway between lr_min and lr_max at t = T/2."""
    for upper, lr_min, lr_max in ((2.0, 0.0, 0.1), (4.0, 0.001, 0.5), (0.5, 0.2, 0.3)):
        spec = Htd(-upper, upper, lr_min, lr_max, 200)
        midpoint = (lr_min + lr_max) / 2
        assert evaluate(spec, 100, 200) == pytest.approx(midpoint, rel=1e-14)


def test_htd_strictly_decreasing_and_in_range():
    """HTD samples decrease strictly and stay within [lr_min, lr_max]."""
    spec = Htd(-6.0, 3.0, 0.0, 0.1, 200)
    rates = curve(spec, 200).rates
    assert all(b < a for a, b in zip(rates, rates[1:]))
    assert all(0.0 <= r <= 0.1 for r in rates)


def test_cosine_and_exponential_monotone():
    """Cosine and exponential decay with lambda < 1 decrease strictly."""
    for spec in (Cosine(0.0, 0.1, 50), ExponentialDecay(0.1, 0.98)):
        rates = curve(spec, 50).rates
        assert all(b < a for a, b in zip(rates, rates[1:]))


def test_exponential_decay_value_and_recurrence():
    """Exponential decay matches lr0 * lambda**t and the one-step recurrence."""
    spec = ExponentialDecay(lr0=0.1, decay=0.98)
    assert evaluate(spec, 200, 200) == pytest.approx(1.7588e-3, rel=1e-4)
    for t in range(200):
        current = evaluate(spec, t, 200)
        assert evaluate(spec, t + 1, 200) == pytest.approx(0.98 * current, rel=1e-12)


def test_exponential_degenerate_factors():
    """lambda = 0 drops to zero after t = 0; lambda = 1 is constant."""
    zero = ExponentialDecay(0.1, 0.0)
    assert evaluate(zero, 0, 5) == 0.1
    assert evaluate(zero, 1, 5) == 0.0
    assert set(curve(ExponentialDecay(0.1, 1.0), 5).rates) == {0.1}


def test_two_stage_continuity_at_switch():
    """Both branches agree at the switch epoch."""
    spec = TwoStageExponential(lr0=0.1, decay1=0.995, decay2=0.96, switch_epoch=100)
    first_branch = evaluate(spec, 100, 200)
    second_branch = 0.1 * 0.995**100 * 0.96 ** (100 - 100)
    assert first_branch == pytest.approx(6.0577e-2, rel=1e-4)
    assert first_branch == pytest.approx(second_branch, rel=1e-12)
    assert evaluate(spec, 101, 200) == pytest.approx(second_branch * 0.96, rel=1e-12)


def test_constant_curve():
    """A constant schedule over horizon 3 has four identical samples."""
    lr_curve = curve(Constant(0.1), 3)
    assert lr_curve.samples == ((0, 0.1), (1, 0.1), (2, 0.1), (3, 0.1))


def test_horizon_one_curve_has_two_samples():
    """horizon = 1 is legal."""
    assert len(curve(Htd(-6, 3, 0, 0.1, 1), 1).samples) == 2


def test_horizon_mismatch_is_configuration_error():
    """Cosine/Htd refuse a horizon other than their own."""
    with pytest.raises(ConfigurationError):
        evaluate(Htd(-6, 3, 0, 0.1, 200), 10, 100)


def test_progress_past_horizon_is_domain_error():
    """t > horizon and t < 0 are rejected."""
    with pytest.raises(ScheduleDomainError):
        evaluate(Constant(0.1), 4, 3)
    with pytest.raises(ScheduleDomainError):
        evaluate(Constant(0.1), -1, 3)


def test_invalid_specs_rejected():
    """Schedule invariants are enforced at construction."""
    with pytest.raises(ConfigurationError):
        StepDecay(((5, 0.1),))
    with pytest.raises(ConfigurationError):
        StepDecay(((0, 0.1), (10, 0.01), (10, 0.001)))
    with pytest.raises(ConfigurationError):
        Htd(1.0, 3.0, 0.0, 0.1, 200)
    with pytest.raises(ConfigurationError):
        Htd(-6.0, 0.0, 0.0, 0.1, 200)
    with pytest.raises(ConfigurationError):
        Cosine(0.1, 0.1, 200)
    with pytest.raises(ConfigurationError):
        ExponentialDecay(0.1, 1.5)


@pytest.mark.parametrize("start", [81.7, "81", True, float("nan")])
def test_step_milestone_start_must_be_whole_epoch(start):
    """Fractional or non-numeric milestone starts are rejected, not truncated."""
    with pytest.raises(ConfigurationError):
        StepDecay(((0, 0.1), (start, 0.01)))
    with pytest.raises(ConfigurationError):
        schedule_from_dict({"kind": "step", "milestones": [[0, 0.1], [start, 0.01]]})


def test_step_milestone_start_accepts_integral_float():
    """81.0 from a JSON document is epoch 81."""
    spec = schedule_from_dict({"kind": "step", "milestones": [[0.0, 0.1], [81.0, 0.01]]})
    assert spec == StepDecay(((0, 0.1), (81, 0.01)))
    assert isinstance(spec.milestones[1][0], int)


def test_evaluate_progress_matches_integer_grid():
    """Real-valued progress agrees with evaluate at t / T."""
    spec = Htd(-6, 3, 0, 0.1, 200)
    assert evaluate_progress(spec, 0.25) == evaluate(spec, 50, 200)
    assert evaluate_progress(RESNET_STEP_DECAY, 0.5, horizon=200) == 0.01
    with pytest.raises(ConfigurationError):
        evaluate_progress(RESNET_STEP_DECAY, 0.5)


def test_step_decay_for_horizon():
    """The rescaled step recipe lands on 81/122 for T = 200."""
    full = step_decay_for_horizon(200)
    assert [start for start, _ in full.milestones] == [0, 81, 122]
    assert [rate for _, rate in full.milestones] == pytest.approx([0.1, 0.01, 0.001], rel=1e-12)
    short = step_decay_for_horizon(100)
    assert [start for start, _ in short.milestones] == [0, 41, 61]


def test_with_horizon_only_touches_horizon_kinds():
    """with_horizon rescales Cosine/Htd and leaves the rest alone."""
    assert with_horizon(Htd(-6, 3, 0, 0.1, 200), 50).horizon == 50
    assert with_horizon(RESNET_STEP_DECAY, 50) is RESNET_STEP_DECAY


def test_parse_schedule_arg_forms():
    """The compact grammar covers every kind."""
    assert parse_schedule_arg("htd:-6,3,0,0.1", 200) == Htd(-6, 3, 0, 0.1, 200)
    assert parse_schedule_arg("cosine:0,0.1,50") == Cosine(0, 0.1, 50)
    assert parse_schedule_arg("step:0=0.1,81=0.01,122=0.001") == RESNET_STEP_DECAY
    assert parse_schedule_arg("exp:0.1,0.98") == ExponentialDecay(0.1, 0.98)
    assert parse_schedule_arg("two_stage:0.1,0.995,0.96,100") == TwoStageExponential(0.1, 0.995, 0.96, 100)
    assert parse_schedule_arg("constant:0.05") == Constant(0.05)


def test_parse_schedule_arg_errors():
    """Malformed compact arguments raise ConfigurationError."""
    for text in ("htd:-6,3,0,0.1", "bogus:1", "exp:0.1", "step:0-0.1", "cosine"):
        with pytest.raises(ConfigurationError):
            parse_schedule_arg(text)


def test_schedule_dict_round_trip_and_strict_keys():
    """JSON objects map onto specs; unknown keys are rejected."""
    spec = Htd(-6, 3, 0, 0.1, 200)
    assert schedule_from_dict(schedule_to_dict(spec)) == spec
    assert schedule_from_dict({"kind": "cosine", "lr_min": 0, "lr_max": 0.1}, horizon=10) == Cosine(0, 0.1, 10)
    with pytest.raises(ConfigurationError):
        schedule_from_dict({"kind": "constant", "rate": 0.1, "typo": 1})
    with pytest.raises(ConfigurationError):
        schedule_from_dict({"kind": "htd", "L": -6, "U": 3, "lr_min": 0, "lr_max": 0.1})


def test_curve_csv_format(tmp_path):
    """CSV has a t,lr header and 10 significant digits."""
    text = curve_to_csv(curve(Htd(-6, 3, 0, 0.1, 200), 200))
    lines = text.splitlines()
    assert lines[0] == "t,lr"
    assert len(lines) == 202
    assert lines[-1] == f"200,{0.05 * (1 - math.tanh(3.0)):.10g}"

    path = write_curve_csv(curve(Constant(0.1), 2), tmp_path / "out" / "curve.csv")
    assert path.read_text() == "t,lr\n0,0.1\n1,0.1\n2,0.1\n"


def test_curve_rejects_unsorted_samples():
    """LearningRateCurve enforces sorted, non-negative samples."""
    with pytest.raises(ConfigurationError):
        LearningRateCurve(horizon=2, samples=((1, 0.1), (0, 0.1)))
    with pytest.raises(ConfigurationError):
        LearningRateCurve(horizon=2, samples=((0, -0.1),))


def test_describe_labels():
    """describe produces short labels for reports."""
    assert describe(Htd(-6, 3, 0, 0.1, 200)) == "HTD(-6,3)"
    assert describe(Cosine(0, 0.1, 200)) == "cosine"
