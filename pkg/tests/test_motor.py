import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossing_marl.motor import (
    MIN_SPEED,
    advance_step,
    begin_step,
    inter_leg_angle,
    smooth_accel,
    step_duration,
    step_length,
    step_onset_penalty,
    walking_effort,
)


def smoothed_closed_form(a0: float, target: float, w: float, n: int) -> float:
    r = (1.0 - 1.0 / w) ** n
    return target * (1.0 - r) + a0 * r


class TestGait:
    def test_unit_speed_step_takes_one_second(self):
        assert step_duration(1.0) == 1.0
        assert step_length(1.0) == 1.0

    def test_step_duration_floors_low_speed(self):
        assert step_duration(0.0) == step_duration(MIN_SPEED) == pytest.approx(MIN_SPEED ** -0.58, rel=1e-14)

    def test_faster_walking_means_shorter_steps(self):
        assert step_duration(2.0) < step_duration(1.0) < step_duration(0.5)

    def test_step_lands_on_commanded_speed(self):
        step = begin_step(0.5, 1.5)
        v = 0.5
        done = False
        n = 0
        while not done:
            step, v, done = advance_step(step, v, 0.1)
            n += 1
        assert v == 1.5
        assert n == math.ceil(step.step_duration / 0.1 - 1e-9)

    def test_acceleration_constant_within_step(self):
        step = begin_step(1.0, 0.2)
        v, speeds = 1.0, [1.0]
        for _ in range(3):
            step, v, _ = advance_step(step, v, 0.1)
            speeds.append(v)
        diffs = [b - a for a, b in zip(speeds, speeds[1:])]
        assert max(diffs) - min(diffs) < 1e-12
        assert diffs[0] == pytest.approx(step.step_accel * 0.1, abs=1e-15)

    def test_negative_speed_rejected(self):
        with pytest.raises(ValueError):
            begin_step(-0.1, 1.0)

    def test_leg_angle_grows_with_speed(self):
        assert 0 < inter_leg_angle(0.5) < inter_leg_angle(1.5) < math.pi


class TestEffort:
    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.0, 3.0), st.floats(0.1, 2.5))
    def test_zero_at_passive_transfer(self, v_minus, two_theta):
        if abs(math.sin(two_theta)) < 1e-3:
            return
        assert walking_effort(v_minus, v_minus * math.cos(two_theta), two_theta) == pytest.approx(0.0, abs=1e-18)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.floats(0.1, 1.5), st.floats(0.1, 10.0))
    def test_degree_two_homogeneous(self, vm, vp, two_theta, lam):
        base = walking_effort(vm, vp, two_theta)
        assert walking_effort(lam * vm, lam * vp, two_theta) == pytest.approx(lam**2 * base, rel=1e-9, abs=1e-12)

    def test_hand_value(self):
        # (1*cos(pi/6) - 0)^2 / (2 * sin^2(pi/6)) = 0.75 / 0.5
        assert walking_effort(1.0, 0.0, math.pi / 6) == pytest.approx(1.5, rel=1e-14)

    def test_degenerate_angle_rejected(self):
        with pytest.raises(ValueError):
            walking_effort(1.0, 1.0, 0.0)

    def test_onset_penalty_is_non_positive_and_scales_with_weight(self):
        p1 = step_onset_penalty(0.0, 1.4, 0.1)
        p2 = step_onset_penalty(0.0, 1.4, 0.2)
        assert p1 < 0 and p2 == pytest.approx(2 * p1)


class TestDriverSmoothing:
    @pytest.mark.parametrize("w", [1.0, 1.5, 3.0, 7.5, 10.0])
    @pytest.mark.parametrize("a0,target", [(0.0, -4.0), (2.0, 0.5), (-3.0, 3.0)])
    def test_matches_geometric_series(self, w, a0, target):
        a = a0
        for n in range(1, 51):
            a = smooth_accel(a, target, w)
            assert a == pytest.approx(smoothed_closed_form(a0, target, w, n), abs=1e-9)

    def test_weight_below_one_means_no_lag(self):
        assert smooth_accel(1.0, -2.0, 0.3) == -2.0

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-5, 3), st.floats(-5, 3), st.floats(1.0, 10.0))
    def test_never_overshoots(self, a0, target, w):
        a = smooth_accel(a0, target, w)
        assert min(a0, target) - 1e-12 <= a <= max(a0, target) + 1e-12
