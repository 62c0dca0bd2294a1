import math

import numpy as np
import pytest

from crossing_marl.data import (
    N_SEGMENTS,
    PEDESTRIAN,
    SCENARIOS,
    VEHICLE,
    InitialConditionModel,
    InteractionPair,
    RawTrack,
    derive_heading,
    derive_speed,
    extract_pairs,
    fit_initial_kde,
    generate_synthetic_corpus,
    passing_times,
    read_pairs,
    read_segments,
    read_tracks_csv,
    resample_track,
    segment_pairs,
    write_pairs,
    write_segments,
    write_tracks_csv,
)
from crossing_marl.evaluation import projected_pet
from crossing_marl.world import SceneGeometry

DT = 0.1


def ped_track(tid, t0=0.0, duration=12.0, x=0.0, y0=-6.7, speed=1.0, direction="east"):
    t = t0 + np.arange(int(round(duration / DT)) + 1) * DT
    return RawTrack(tid, PEDESTRIAN, direction, np.round(t, 9), np.full(t.size, x), y0 + speed * (t - t0))


def veh_track(tid, t0=0.0, x0=-40.0, speed=5.0, duration=14.0):
    t = t0 + np.arange(int(round(duration / DT)) + 1) * DT
    return RawTrack(tid, VEHICLE, "north", np.round(t, 9), x0 + speed * (t - t0), np.zeros(t.size))


class TestExtractFixtures:
    def test_single_qualifying_pair(self):
        pairs = extract_pairs([ped_track("p1"), veh_track("v1")])
        assert [p.pair_id for p in pairs] == ["p1__v1"]
        p = pairs[0]
        assert len(p.traj) == 60
        assert p.t_start == pytest.approx(3.0)
        assert p.traj.veh_x[0] == pytest.approx(-25.0)
        np.testing.assert_allclose(p.traj.t, np.arange(60) * DT)
        np.testing.assert_allclose(p.traj.ped_speed, 1.0, atol=1e-9)
        np.testing.assert_allclose(p.traj.ped_heading, 0.0, atol=1e-9)

    def test_short_overlap_rejected(self):
        # 35 m alignment zone at 8 m/s is under 6 s
        assert extract_pairs([ped_track("p1"), veh_track("v1", speed=8.0, x0=-40.0)]) == []

    def test_two_vehicles_rejected(self):
        tracks = [ped_track("p1"), veh_track("v1"), veh_track("v2", x0=-45.0)]
        assert extract_pairs(tracks) == []

    def test_two_pedestrians_on_one_vehicle_rejected(self):
        tracks = [ped_track("p1"), ped_track("p2", x=1.0), veh_track("v1")]
        assert extract_pairs(tracks) == []

    def test_wrong_directions_ignored(self):
        assert extract_pairs([ped_track("p1", direction="west"), veh_track("v1")]) == []

    def test_refuge_island_pedestrian_blocks_vehicle(self):
        # opposite-direction walker standing on the island while the car approaches
        island = RawTrack("w1", PEDESTRIAN, "west", np.round(np.arange(0, 140) * DT, 9), np.full(140, 5.0), np.full(140, 2.5))
        assert extract_pairs([ped_track("p1"), veh_track("v1"), island]) == []
        elsewhere = RawTrack("w1", PEDESTRIAN, "west", np.round(np.arange(0, 140) * DT, 9), np.full(140, 5.0), np.full(140, 9.0))
        assert len(extract_pairs([ped_track("p1"), veh_track("v1"), elsewhere])) == 1

    def test_off_grid_timestamps_resampled(self):
        p, v = ped_track("p1"), veh_track("v1")
        jitter = RawTrack("p1", PEDESTRIAN, "east", p.t + 0.013, p.x, p.y + 0.013)
        pairs = extract_pairs([jitter, v])
        assert len(pairs) == 1
        np.testing.assert_allclose(pairs[0].traj.ped_y, extract_pairs([p, v])[0].traj.ped_y, atol=1e-9)

    def test_three_segments_per_pair(self):
        segs = segment_pairs(extract_pairs([ped_track("p1"), veh_track("v1")]))
        assert [s.index for s in segs] == [0, 1, 2]
        assert all(len(s.traj) == 20 and s.traj.t[0] == 0.0 for s in segs)
        assert segs[1].traj.veh_x[0] == pytest.approx(-15.0)


class TestSyntheticCorpus:
    def test_known_composition_fully_retained(self):
        tracks = generate_synthetic_corpus(12, (0.5, 0.25, 0.25), np.random.default_rng(0))
        pairs = extract_pairs(tracks)
        expected = {f"p{i:04d}__v{i:04d}" for i in range(12)}
        assert {p.pair_id for p in pairs} == expected
        counts = {k: sum(p.scenario == k for p in pairs) for k in SCENARIOS}
        assert counts == {"vehicle_first": 6, "ped_first_yield": 3, "ped_first_no_yield": 3}
        assert len(segment_pairs(pairs)) == 3 * len(pairs)

    def test_vehicle_first_has_negative_pet(self):
        tracks = generate_synthetic_corpus(10, (1, 0, 0), np.random.default_rng(1))
        for p in extract_pairs(tracks):
            assert projected_pet(p.initial_state()) < 0

    def test_pedestrian_first_passes_first(self):
        g = SceneGeometry()
        tracks = generate_synthetic_corpus(6, (0, 0.5, 0.5), np.random.default_rng(2))
        by_id = {t.track_id: t for t in tracks}
        for i in range(6):
            t_ped, t_veh = passing_times(by_id[f"p{i:04d}"], by_id[f"v{i:04d}"], g)
            assert t_ped < t_veh

    def test_yielding_vehicles_slow_down(self):
        tracks = generate_synthetic_corpus(4, (0, 1, 0), np.random.default_rng(3))
        for p in extract_pairs(tracks):
            assert p.traj.veh_speed.min() < 0.5 * p.traj.veh_speed[0]

    def test_bad_mix_rejected(self):
        with pytest.raises(ValueError):
            generate_synthetic_corpus(3, (0.5, 0.5, 0.5), np.random.default_rng(0))

    def test_seeded(self):
        a = generate_synthetic_corpus(3, rng=np.random.default_rng(5))
        b = generate_synthetic_corpus(3, rng=np.random.default_rng(5))
        assert all(np.array_equal(x.y, y.y) for x, y in zip(a, b))


def test_derived_kinematics():
    t = np.arange(30) * DT
    x, y = 2.0 * t, 2.0 * t
    np.testing.assert_allclose(derive_speed(x, y, DT), 2 * math.sqrt(2))
    np.testing.assert_allclose(derive_heading(x, y, DT), math.pi / 4)


def test_resample_onto_grid():
    tr = RawTrack("a", PEDESTRIAN, "east", [0.05, 0.32], [0.0, 2.7], [0.0, 0.0])
    r = resample_track(tr, DT)
    np.testing.assert_allclose(r.t, [0.1, 0.2, 0.3])
    np.testing.assert_allclose(r.x, [0.5, 1.5, 2.5])


def test_track_validation():
    with pytest.raises(ValueError):
        RawTrack("a", PEDESTRIAN, "east", [0.0, 0.0], [0, 1], [0, 1])
    with pytest.raises(ValueError):
        RawTrack("a", "bicycle", "east", [0.0], [0], [0])


def test_csv_roundtrip(tmp_path):
    tracks = [ped_track("p1"), veh_track("v1")]
    path = tmp_path / "tracks.csv"
    write_tracks_csv(tracks, path)
    back = read_tracks_csv(path)
    assert [t.track_id for t in back] == ["p1", "v1"]
    np.testing.assert_allclose(back[1].x, tracks[1].x, atol=1e-6)


def test_csv_missing_columns(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("track_id,t,x\n")
    with pytest.raises(ValueError, match="missing"):
        read_tracks_csv(path)


def test_pair_and_segment_jsonl_roundtrip(tmp_path):
    pairs = extract_pairs([ped_track("p1"), veh_track("v1")])
    write_pairs(pairs, tmp_path / "pairs.jsonl")
    back = read_pairs(tmp_path / "pairs.jsonl")
    assert back[0].pair_id == pairs[0].pair_id
    np.testing.assert_array_equal(back[0].traj.veh_x, pairs[0].traj.veh_x)
    segs = segment_pairs(pairs)
    write_segments(segs, tmp_path / "segs.jsonl")
    assert [s.segment_id for s in read_segments(tmp_path / "segs.jsonl")] == [s.segment_id for s in segs]


class TestInitialConditionModel:
    def test_needs_two_pairs(self):
        with pytest.raises(ValueError):
            fit_initial_kde(extract_pairs([ped_track("p1"), veh_track("v1")]))

    def test_fit_sample_and_density(self):
        pairs = extract_pairs(generate_synthetic_corpus(9, rng=np.random.default_rng(0)))
        kde = fit_initial_kde(pairs)
        assert kde.samples.shape == (27, 5)
        draws = kde.sample(2000, np.random.default_rng(1))
        np.testing.assert_allclose(draws.mean(axis=0), kde.samples.mean(axis=0), atol=0.5)
        grid = np.linspace(-40, 20, 6001)
        mass = np.trapezoid(np.exp(kde.marginal_log_density(3, grid)), grid)
        assert mass == pytest.approx(1.0, abs=1e-3)
        assert kde.log_density(kde.samples).shape == (27,)

    def test_roundtrip(self):
        pairs = extract_pairs(generate_synthetic_corpus(3, rng=np.random.default_rng(0)))
        kde = fit_initial_kde(pairs)
        back = InitialConditionModel.from_dict(kde.to_dict())
        np.testing.assert_array_equal(back.bandwidth, kde.bandwidth)


def test_pair_dict_roundtrip():
    p = extract_pairs([ped_track("p1"), veh_track("v1")])[0]
    q = InteractionPair.from_dict(p.to_dict())
    assert q.t_start == p.t_start and np.array_equal(q.traj.ped_y, p.traj.ped_y)
