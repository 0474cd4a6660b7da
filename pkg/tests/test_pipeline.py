import numpy as np
import pytest
from _synthetic import ar1_tracks, follower_tracks, white_tracks

from adaptive_di.ensemble import EnsembleHyper
from adaptive_di.errors import ParameterError
from adaptive_di.ingest import SampledTrack
from adaptive_di.pipeline import (
    ADI_COLUMNS,
    PairConfig,
    compute_adi_series,
    compute_ami_series,
    compute_scene,
    gate_pairs,
    instantaneous_di,
    read_adi_csv,
    write_adi_csv,
)


def static(actor, xy, T=50, label="Pedestrian"):
    return SampledTrack(actor, label, np.arange(T), np.tile(np.asarray(xy, float), (T, 1)))


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"markov_order": 0}, {"gate_radius": 0}, {"side_cond_max": -1}, {"bandwidth": 0},
        {"mode": "online"}, {"center": "global"}, {"min_overlap": 0},
    ])
    def test_rejects(self, kw):
        with pytest.raises(ParameterError):
            PairConfig(**kw)

    def test_burn_in(self):
        assert PairConfig().burn_in == 5
        assert PairConfig(markov_order=7, bandwidth=2.5).burn_in == 7
        assert PairConfig(bandwidth=2.5).burn_in == 3


class TestGating:
    def test_static_within_radius(self):
        ((pair, times),) = gate_pairs([static(1, (0, 0)), static(2, (50, 0))], 100)
        assert pair == (1, 2) and times.tolist() == list(range(50))

    def test_static_outside_radius(self):
        assert gate_pairs([static(1, (0, 0)), static(2, (150, 0))], 100) == []

    def test_crossing(self):
        # |10 t - 500| <= 100 exactly for t in [40, 60]
        t = np.arange(101)
        mover = SampledTrack(1, "Biker", t, np.column_stack([10.0 * t, np.zeros(101)]))
        ((_, times),) = gate_pairs([mover, static(2, (500, 0), T=101)], 100)
        assert times.tolist() == list(range(40, 61))

    def test_disjoint_lifetimes(self):
        a = static(1, (0, 0))
        b = SampledTrack(2, "Biker", np.arange(60, 80), np.zeros((20, 2)))
        assert gate_pairs([a, b], 100) == []

    def test_bad_radius(self):
        with pytest.raises(ParameterError):
            gate_pairs([], 0)


class TestInstantaneous:
    def test_white_noise_null_large_sample(self):
        cfg = PairConfig(bandwidth=1000.0)
        vals = np.array([instantaneous_di(white_tracks(s), 1, 2, 100, cfg) for s in range(40)])
        assert np.all(vals >= 0)
        assert np.mean(vals < 0.05) >= 0.95

    def test_follower_is_large_and_directed(self):
        tr = follower_tracks(0)
        fwd = instantaneous_di(tr, 1, 2, 100)
        bwd = instantaneous_di(tr, 2, 1, 100)
        assert fwd > 1.0 and fwd > 10 * bwd

    def test_missing_history(self):
        tr = follower_tracks(0)
        assert instantaneous_di(tr, 1, 2, 0) is None
        assert instantaneous_di(tr, 1, 2, 500) is None
        assert instantaneous_di(tr, 1, 2, 1, PairConfig(markov_order=2)) is None
        assert instantaneous_di(tr, 1, 2, 2, PairConfig(markov_order=2)) is not None


class TestAdiSeries:
    def test_constant_tracks(self):
        rec = compute_adi_series([static(1, (0, 0)), static(2, (10, 0))], (1, 2))
        np.testing.assert_allclose(rec.forward.ensemble, 0.0, atol=1e-6)
        np.testing.assert_allclose(rec.backward.ensemble, 0.0, atol=1e-6)

    def test_follower_directionality(self):
        for seed in range(10):
            rec = compute_adi_series(follower_tracks(seed), (1, 2))
            f, b = rec.forward.ensemble[20:], rec.backward.ensemble[20:]
            assert np.mean(f > b) >= 0.9

    def test_short_overlap_omitted(self):
        tracks = [static(1, (0, 0), T=15), static(2, (10, 0), T=15)]
        assert compute_adi_series(tracks, (1, 2)) is None

    def test_record_structure(self):
        rec = compute_adi_series(follower_tracks(3), (1, 2), scene_id="s")
        f = rec.forward
        assert rec.key == "s:1:2" and rec.labels == ("Pedestrian", "Biker")
        assert np.all(np.diff(f.times) > 0) and f.times[0] == 1
        assert np.all(f.instantaneous >= 0) and np.all(rec.backward.instantaneous >= 0)
        np.testing.assert_array_equal(rec.symmetrized, f.ensemble + rec.backward.ensemble)
        assert f.burn_in.tolist() == [True] * 5 + [False] * (len(f.times) - 5)

    def test_burn_in_restarts_after_gap(self):
        a, b = follower_tracks(4, T=120)
        keep = (a.times < 50) | (a.times >= 60)
        a = SampledTrack(1, a.label, a.times[keep], a.positions[keep])
        rec = compute_adi_series([a, b], (1, 2))
        t, burn = rec.times, rec.forward.burn_in
        assert set(t[burn]) == set(range(1, 6)) | set(range(61, 66))

    def test_causal_mode_runs(self):
        rec = compute_adi_series(follower_tracks(5), (1, 2), PairConfig(mode="causal"))
        assert np.mean(rec.forward.ensemble[20:] > rec.backward.ensemble[20:]) >= 0.9


class TestAmi:
    def test_symmetric(self):
        tr = ar1_tracks(2)
        a = compute_ami_series(tr, (1, 2))
        b = compute_ami_series(tr, (2, 1))
        np.testing.assert_allclose(a.instantaneous, b.instantaneous, atol=1e-9)
        np.testing.assert_allclose(a.ensemble, b.ensemble, atol=1e-9)

    def test_follower_positive(self):
        s = compute_ami_series(follower_tracks(0), (1, 2))
        assert s.ensemble[20:].mean() > 0


def three_actor_scene():
    a, b = follower_tracks(6)
    far = SampledTrack(3, "Skater", np.arange(200),
                       np.random.default_rng(1).normal(0, 2, (200, 2)) + [530.0, 470.0])
    return [a, b, far]


class TestScene:
    def test_deterministic_and_thread_independent(self):
        tracks = three_actor_scene()
        one = compute_scene(tracks, scene_id="x")
        two = compute_scene(tracks, scene_id="x", threads=4)
        assert [r.pair for r in one] == [r.pair for r in two]
        for r1, r2 in zip(one, two):
            np.testing.assert_array_equal(r1.forward.ensemble, r2.forward.ensemble)
            np.testing.assert_array_equal(r1.backward.instantaneous, r2.backward.instantaneous)

    def test_gating_soundness(self):
        tracks = three_actor_scene()
        pos = {t.actor_id: dict(zip(t.times.tolist(), t.positions)) for t in tracks}
        for rec in compute_scene(tracks, PairConfig(gate_radius=60.0)):
            i, j = rec.pair
            for t in rec.times:
                assert np.hypot(*(pos[i][t] - pos[j][t])) <= 60.0

    def test_pair_independence(self):
        tracks = three_actor_scene()
        full = {r.pair: r for r in compute_scene(tracks)}
        assert len(full) == 3
        only = compute_scene(tracks, pairs=[(2, 1)])
        assert [r.pair for r in only] == [(1, 2)]
        np.testing.assert_array_equal(only[0].forward.ensemble, full[(1, 2)].forward.ensemble)

    def test_ami_output(self):
        records, ami = compute_scene(follower_tracks(0), ami=True)
        assert len(records) == len(ami) == 1

    def test_csv_round_trip(self, tmp_path):
        records = compute_scene(three_actor_scene(), scene_id="s1")
        path = tmp_path / "adi_series.csv"
        write_adi_csv(records, path)
        assert path.read_text().splitlines()[0] == ",".join(ADI_COLUMNS)
        back = read_adi_csv(path, labels={1: "Pedestrian"})
        assert [r.key for r in back] == [r.key for r in records]
        for r1, r2 in zip(records, back):
            np.testing.assert_array_equal(r1.forward.ensemble, r2.forward.ensemble)
            np.testing.assert_array_equal(r1.backward.instantaneous, r2.backward.instantaneous)
            np.testing.assert_array_equal(r1.forward.burn_in, r2.forward.burn_in)
        assert back[0].labels[0] == "Pedestrian"


def test_hyper_is_used():
    tr = follower_tracks(0)
    a = compute_adi_series(tr, (1, 2), PairConfig(hyper=EnsembleHyper(beta=0.5)))
    b = compute_adi_series(tr, (1, 2))
    np.testing.assert_array_equal(a.forward.instantaneous, b.forward.instantaneous)
    assert not np.array_equal(a.forward.ensemble, b.forward.ensemble)
