import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossing_marl.evaluation import (
    LOG_DENSITY_FLOOR,
    METRICS,
    KDEModel,
    ade_fde,
    composite_nll,
    compute_metrics,
    evaluate_segments,
    fit_metric_kde,
    histogram_rows,
    kde_log_density,
    ks_statistic,
    projected_pet,
    scott_bandwidth,
)
from crossing_marl.trajectory import Trajectory
from crossing_marl.world import WorldState


def straight_traj(n=20, dt=0.1, ped_v=1.0, veh_v=8.0, ped_y0=-4.0, veh_x0=-20.0):
    t = np.arange(n) * dt
    return Trajectory(
        t=t, ped_x=np.zeros(n), ped_y=ped_y0 + ped_v * t, ped_speed=np.full(n, ped_v), ped_heading=np.zeros(n),
        gaze_offset=np.zeros(n), veh_x=veh_x0 + veh_v * t, veh_y=np.zeros(n), veh_speed=np.full(n, veh_v),
        veh_accel=np.zeros(n),
    )


class TestKS:
    def test_identical(self):
        assert ks_statistic([1, 2, 3], [1, 2, 3]) == 0.0

    def test_disjoint(self):
        assert ks_statistic([1, 2, 3], [10, 11]) == 1.0

    def test_shifted(self):
        assert ks_statistic([1, 2, 3], [2, 3, 4]) == pytest.approx(1 / 3, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ks_statistic([], [1.0])


class TestKDE:
    def test_scott_rule(self):
        a = math.sqrt(31 / 8)
        x = np.r_[np.full(16, a), np.full(16, -a)]
        assert np.std(x, ddof=1) == 2.0
        assert scott_bandwidth(x) == 1.0

    def test_single_point_density(self):
        m = KDEModel(np.array([0.0]), 1.0)
        assert kde_log_density(m, [0.0])[0] == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-14)

    def test_floor(self):
        m = fit_metric_kde(np.array([0.0, 0.1, 0.2]))
        assert kde_log_density(m, [1e6])[0] == LOG_DENSITY_FLOOR

    def test_integrates_to_one(self):
        rng = np.random.default_rng(0)
        m = fit_metric_kde(rng.normal(size=200))
        grid = np.linspace(-10, 10, 20001)
        assert np.trapezoid(np.exp(kde_log_density(m, grid)), grid) == pytest.approx(1.0, abs=1e-6)

    def test_rejects_bad_samples(self):
        with pytest.raises(ValueError):
            fit_metric_kde([])
        with pytest.raises(ValueError):
            fit_metric_kde([0.0, math.nan])

    def test_roundtrip(self):
        m = fit_metric_kde([0.0, 1.0, 3.0])
        m2 = KDEModel.from_dict(m.to_dict())
        assert m2.bandwidth == m.bandwidth and np.array_equal(m2.samples, m.samples)


class TestADEFDE:
    def test_constant_offset(self):
        real = np.stack([np.linspace(0, 5, 11), np.zeros(11)], axis=-1)
        model = real + np.array([3.0, 4.0])
        assert ade_fde(model, real) == (5.0, 5.0)

    def test_linear_ramp(self):
        real = np.zeros((11, 2))
        model = np.stack([np.arange(11) * 0.5, np.zeros(11)], axis=-1)
        assert ade_fde(model, real) == (2.5, 5.0)

    def test_two_agents_averaged(self):
        real = np.zeros((4, 2, 2))
        model = real.copy()
        model[:, 1, 0] = 2.0
        assert ade_fde(model, real) == (1.0, 1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ade_fde(np.zeros((3, 2)), np.zeros((4, 2)))


class TestCompositeNLL:
    def test_two_metric_hand_average(self):
        kdes = {"a": KDEModel(np.array([0.0]), 1.0), "b": KDEModel(np.array([1.0, 3.0]), 0.5)}
        seg1 = {"a": np.array([0.0, 1.0]), "b": np.array([2.0])}
        seg2 = {"a": np.array([0.5]), "b": np.array([1.0, 3.0, 2.5])}

        def nll(m, xs):
            return -np.mean(kde_log_density(m, xs))

        a = (nll(kdes["a"], seg1["a"]) + nll(kdes["a"], seg2["a"])) / 2
        b = (nll(kdes["b"], seg1["b"]) + nll(kdes["b"], seg2["b"])) / 2
        got = composite_nll([seg1, seg2], kdes)
        assert got.value == pytest.approx((a + b) / 2, abs=1e-12)
        assert got.per_metric == {"a": pytest.approx(a, abs=1e-12), "b": pytest.approx(b, abs=1e-12)}

    def test_missing_metric_skipped(self, caplog):
        kdes = {"a": KDEModel(np.array([0.0]), 1.0), "b": KDEModel(np.array([0.0]), 1.0)}
        got = composite_nll({"a": np.array([0.0])}, kdes)
        assert got.skipped == ["b"] and list(got.per_metric) == ["a"]
        assert "no model samples" in caplog.text

    def test_nothing_to_score(self):
        with pytest.raises(ValueError):
            composite_nll({}, {"a": KDEModel(np.array([0.0]), 1.0)})


class TestPET:
    def test_pedestrian_first_positive(self):
        s = WorldState(ped_y=-1.0, ped_speed=1.0, veh_x=-20.0, veh_speed=10.0)
        assert projected_pet(s) == pytest.approx(1.0)

    def test_vehicle_first_negative(self):
        s = WorldState(ped_y=-4.0, ped_speed=1.0, veh_x=-5.0, veh_speed=10.0)
        assert projected_pet(s) == pytest.approx(-3.5)

    def test_standing_pedestrian_uses_speed_floor(self):
        s = WorldState(ped_y=-1.0, ped_speed=0.0, veh_x=-10.0, veh_speed=10.0)
        assert projected_pet(s) == pytest.approx(1.0 - 10.0)

    def test_undefined_cases(self):
        assert projected_pet(WorldState(ped_y=0.5, veh_x=-5.0)) is None
        assert projected_pet(WorldState(ped_y=-2.0, veh_x=1.0)) is None
        assert projected_pet(WorldState(ped_y=-2.0, ped_speed=1.0, ped_heading=math.pi, veh_x=-5.0)) is None


def test_metrics_on_straight_lines():
    m = compute_metrics(straight_traj())
    assert set(m) == set(METRICS)
    np.testing.assert_allclose(m["ped_accel"], 0.0, atol=1e-12)
    np.testing.assert_allclose(m["ped_angular_velocity"], 0.0, atol=1e-12)
    assert len(m["pet"]) == 20


def test_metrics_need_three_samples():
    with pytest.raises(ValueError):
        compute_metrics(straight_traj(n=2))


def test_evaluate_segments_self_match():
    real = [straight_traj(), straight_traj(ped_v=1.3, veh_v=6.0)]
    rep = evaluate_segments([[real[0]], [real[1]]], real)
    assert rep["ade"] == 0.0 and rep["fde"] == 0.0
    assert all(v == 0.0 for v in rep["ks"].values())
    worse = evaluate_segments([[straight_traj(ped_v=2.0)], [straight_traj(veh_v=12.0)]], real)
    assert worse["composite_nll"] > rep["composite_nll"] and worse["ade"] > 0


def test_histogram_rows_are_densities():
    rows = histogram_rows({"x": np.random.default_rng(0).normal(size=500)}, "real", bins=20)
    assert len(rows) == 20
    assert sum(r["density"] * (r["bin_hi"] - r["bin_lo"]) for r in rows) == pytest.approx(1.0)


class TestWorkedExamples:
    def test_pet_symmetric_crossing_times(self):
        s = WorldState(ped_y=-3.0, ped_speed=1.5, veh_x=-10.0, veh_speed=5.0)
        assert projected_pet(s) == pytest.approx(0.0, abs=1e-12)

    def test_pet_pedestrian_first(self):
        s = WorldState(ped_y=-2.0, ped_speed=2.0, veh_x=-20.0, veh_speed=5.0)
        assert projected_pet(s) == pytest.approx(3.0, abs=1e-12)

    def test_pet_positive_through_pedestrian_first_approach(self):
        tr = straight_traj(n=30, ped_v=1.5, veh_v=4.0, ped_y0=-3.0, veh_x0=-30.0)
        pet = compute_metrics(tr)["pet"]
        assert len(pet) == 21 and np.all(pet > 0)

    def test_accel_on_linear_speed_ramp(self):
        n = 20
        t = np.arange(n) * 0.1
        tr = Trajectory(t=t, ped_x=np.zeros(n), ped_y=-5 + t + 0.5 * t * t, ped_speed=1 + t, ped_heading=np.zeros(n),
                        gaze_offset=np.zeros(n), veh_x=-30 + 5 * t, veh_y=np.zeros(n), veh_speed=np.full(n, 5.0),
                        veh_accel=np.zeros(n))
        np.testing.assert_allclose(compute_metrics(tr)["ped_accel"][1:-1], 1.0, atol=1e-9)

    def test_hand_computed_five_step_trajectory(self):
        t = np.arange(5) * 0.1
        tr = Trajectory(
            t=t, ped_x=np.array([0.0, 0.0, 0.1, 0.2, 0.2]), ped_y=np.array([-3.0, -2.9, -2.8, -2.7, -2.6]),
            ped_speed=np.array([1.0, 1.1, 1.3, 1.3, 1.2]), ped_heading=np.array([0.0, 0.0, 0.1, 0.3, 0.3]),
            gaze_offset=np.zeros(5), veh_x=np.array([-10.0, -9.0, -8.0, -7.0, -6.0]), veh_y=np.zeros(5),
            veh_speed=np.array([10.0, 10.0, 9.0, 8.0, 8.0]), veh_accel=np.zeros(5),
        )
        m = compute_metrics(tr)
        np.testing.assert_allclose(m["ped_accel"], [1.0, 1.5, 1.0, -0.5, -1.0], atol=1e-9)
        np.testing.assert_allclose(m["veh_accel"], [0.0, -5.0, -10.0, -5.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(m["ped_angular_velocity"], [0.0, 0.5, 1.5, 1.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(m["ped_angular_accel"], [5.0, 7.5, 2.5, -7.5, -10.0], atol=1e-9)
        np.testing.assert_allclose(m["distance"], [np.hypot(10.0, 3.0), np.hypot(9.0, 2.9), np.hypot(8.1, 2.8),
                                                   np.hypot(7.2, 2.7), np.hypot(6.2, 2.6)], atol=1e-12)
        np.testing.assert_array_equal(m["ped_x"], tr.ped_x)
        np.testing.assert_array_equal(m["veh_x"], tr.veh_x)
        np.testing.assert_array_equal(m["ped_y"], tr.ped_y)
        np.testing.assert_array_equal(m["ped_heading"], tr.ped_heading)
        np.testing.assert_array_equal(m["ped_speed"], tr.ped_speed)
        np.testing.assert_array_equal(m["veh_speed"], tr.veh_speed)
        expected_pet = [1.0 - 3.0, 0.9 - 2.9 / 1.1, 8.0 / 9.0 - 2.8 / (1.3 * math.cos(0.1)),
                        7.0 / 8.0 - 2.7 / (1.3 * math.cos(0.3)), 6.0 / 8.0 - 2.6 / (1.2 * math.cos(0.3))]
        np.testing.assert_allclose(m["pet"], expected_pet, atol=1e-12)

    def test_two_point_mixture_density(self):
        model = fit_metric_kde([-1.0, 1.0])
        h = model.bandwidth
        assert h == pytest.approx(math.sqrt(2.0) * 2 ** -0.2, rel=1e-15)
        mixture = math.exp(-0.5 / h**2) / (h * math.sqrt(2 * math.pi))
        assert kde_log_density(model, [0.0])[0] == pytest.approx(math.log(mixture), abs=1e-12)

    def test_far_query_hits_floor_exactly(self):
        model = fit_metric_kde([0.0, 1.0, 2.0])
        assert kde_log_density(model, [100 * model.bandwidth + 2.0])[0] == LOG_DENSITY_FLOOR

    def test_linear_ade_ramp(self):
        real = np.zeros((21, 2))
        model = np.stack([np.linspace(0.0, 2.0, 21), np.zeros(21)], axis=-1)
        ade, fde = ade_fde(model, real)
        assert ade == pytest.approx(1.0, abs=1e-12) and fde == 2.0


class TestCompositeProperties:
    REAL = {f"m{i}": np.random.default_rng(i).normal(i, 1 + i / 4, 200) for i in range(13)}

    def test_self_match_near_kde_self_nll(self):
        kdes = {k: fit_metric_kde(v) for k, v in self.REAL.items()}
        got = composite_nll(self.REAL, kdes)
        by_hand = np.mean([-np.mean(kde_log_density(kdes[k], v)) for k, v in self.REAL.items()])
        assert got.value == pytest.approx(by_hand, abs=1e-12)

    def test_shifting_one_metric_into_floor(self):
        kdes = {k: fit_metric_kde(v) for k, v in self.REAL.items()}
        base = composite_nll(self.REAL, kdes)
        moved = dict(self.REAL, m0=self.REAL["m0"] + 1e4)
        got = composite_nll(moved, kdes)
        increase = -LOG_DENSITY_FLOOR - base.per_metric["m0"]
        assert got.value - base.value == pytest.approx(increase / 13, abs=1e-12)

    def test_invariant_to_metric_order(self):
        kdes = {k: fit_metric_kde(v) for k, v in self.REAL.items()}
        reordered = {k: self.REAL[k] for k in reversed(list(self.REAL))}
        assert composite_nll(reordered, kdes).value == composite_nll(self.REAL, kdes).value

    def test_bootstrap_resamples_score_better_than_a_shifted_model(self):
        rng = np.random.default_rng(7)
        wins = 0
        for _ in range(20):
            real = {k: rng.normal(0.0, 1.0, 150) for k in ("a", "b", "c")}
            kdes = {k: fit_metric_kde(v) for k, v in real.items()}
            model = {k: rng.normal(0.5, 1.3, 150) for k in real}
            boot = {k: rng.choice(v, v.size, replace=True) for k, v in real.items()}
            wins += composite_nll(boot, kdes).value < composite_nll(model, kdes).value
        assert wins >= 18


@pytest.mark.filterwarnings("ignore:ks_2samp:RuntimeWarning")
@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=30), st.lists(st.floats(-50, 50), min_size=1, max_size=30))
def test_ks_bounded_and_symmetric(a, b):
    d = ks_statistic(a, b)
    assert 0.0 <= d <= 1.0
    assert d == ks_statistic(b, a)
