import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from srg_lab.errors import ConfigError, DomainError, EmptyCloudError
from srg_lab.operators import Integrator, Scale, StaticNonlinearity, evaluate_batch, identity, lag, static_gain
from srg_lab.sampler import (ExcitationConfig, SrgCloud, cloud_from_json, cloud_from_trajectories,
                             cloud_min_distance, cloud_to_csv, cloud_to_json, generate_pairs, invert_cloud,
                             merge_clouds, negate_cloud, points_min_distance, resolve_mode, sample_hard_srg,
                             sample_soft_srg, scale_cloud)
from srg_lab.signals import SampledSignal, gain_phase

SMALL = ExcitationConfig(n_pairs=40, horizon=10.0, l2e_pairs=10)


def polar(mag, ang, kind="soft"):
    mag, ang = np.atleast_1d(mag).astype(float), np.atleast_1d(ang).astype(float)
    return SrgCloud(kind, mag, np.ones_like(mag), ang, np.full(len(mag), math.nan), np.arange(len(mag)))


def test_static_gain_soft_points():
    c = sample_soft_srg(Scale(2.5, identity()), SMALL)
    assert len(c) == SMALL.n_pairs
    assert np.allclose(c.magnitude, 2.5, rtol=1e-12) and np.all(c.angle <= 1e-7)


def test_static_gain_hard_points():
    c = sample_hard_srg(static_gain(1.7), SMALL)
    assert np.allclose(c.magnitude, 1.7, rtol=1e-12) and np.all(c.angle <= 1e-7)
    assert set(np.unique(c.horizon_T)) <= set(SMALL.hard_grid())


def test_integrator_soft_on_imaginary_axis(integrator_soft):
    assert len(integrator_soft) >= 200
    assert np.max(np.abs(np.cos(integrator_soft.angle))) <= 0.02
    assert integrator_soft.stats["input_mode"] == "derivative"


def test_integrator_hard_in_closed_rhp(integrator_hard):
    re = integrator_hard.z.real
    assert np.min(re) >= -1e-9
    assert np.max(re) >= 0.05


def test_lag_circle(lag_soft):
    assert len(lag_soft) >= 500
    assert np.max(np.abs(lag_soft.z - 0.5)) <= 0.52
    assert np.max(lag_soft.magnitude) <= 1.02


@pytest.mark.parametrize("spec", [StaticNonlinearity("tanh_gain", {"k": 1.0}), StaticNonlinearity("relu"),
                                  StaticNonlinearity("saturation", {"limit": 0.5})], ids=lambda s: s.kind)
def test_monotone_static_maps_incrementally_positive(spec):
    c = sample_soft_srg(spec, SMALL)
    assert np.all(c.angle <= math.pi / 2 + 1e-6)


def test_soft_equals_hard_at_horizon():
    spec = lag()
    soft = sample_soft_srg(spec, SMALL)
    hard = sample_hard_srg(spec, SMALL)
    H = SMALL.hard_grid()[-1]
    at_h = hard.horizon_T == H
    table = {int(p): (o, i, a) for p, o, i, a in zip(hard.pair_id[at_h], hard.out_norm[at_h],
                                                    hard.in_norm[at_h], hard.angle[at_h])}
    for p, o, i, a in zip(soft.pair_id, soft.out_norm, soft.in_norm, soft.angle):
        assert table[int(p)] == (o, i, a)


def test_hard_point_matches_gain_phase_oracle():
    cfg = SMALL
    U1, U2 = generate_pairs(cfg, resolve_mode(lag(), cfg), 1, 0, 3)
    Y1, Y2 = evaluate_batch(lag(), U1, cfg.dt), evaluate_batch(lag(), U2, cfg.dt)
    c = cloud_from_trajectories(U1, Y1, U2, Y2, cfg.dt, "soft")
    for j in range(3):
        du = SampledSignal(cfg.dt, U1[j] - U2[j])
        dy = SampledSignal(cfg.dt, Y1[j] - Y2[j])
        gp = gain_phase(du, dy)
        assert c.magnitude[j] == pytest.approx(gp.gain, rel=1e-14)
        assert c.angle[j] == gp.phase


def test_determinism():
    a = sample_hard_srg(lag(), SMALL)
    b = sample_hard_srg(lag(), SMALL)
    for f in ("out_norm", "in_norm", "angle", "pair_id"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    assert a.digest == b.digest
    c = sample_hard_srg(lag(), replace(SMALL, seed=1))
    assert not np.array_equal(a.out_norm, c.out_norm)


def test_threads_do_not_change_result(monkeypatch):
    a = sample_hard_srg(lag(), SMALL)
    monkeypatch.setenv("SRG_LAB_THREADS", "4")
    b = sample_hard_srg(lag(), SMALL)
    assert np.array_equal(a.out_norm, b.out_norm) and np.array_equal(a.angle, b.angle)


def test_admission_rejects_and_empty_error():
    # a slow lag keeps ringing into the tail window, so every pair fails admission
    slow = lag(time_constant=50.0)
    with pytest.raises(EmptyCloudError, match="output_tail_energy"):
        sample_soft_srg(slow, replace(SMALL, input_mode="windowed"))
    with pytest.raises(EmptyCloudError, match="zero_output_increment|output"):
        sample_soft_srg(static_gain(0.0), SMALL)


def test_admission_stats(integrator_soft):
    s = integrator_soft.stats
    assert s["pairs_tried"] == 200 and s["pairs_admitted"] == len(integrator_soft)
    assert sum(s["rejected"].values()) == s["pairs_tried"] - s["pairs_admitted"]


def test_config_validation():
    with pytest.raises(ConfigError):
        ExcitationConfig(n_pairs=1)
    with pytest.raises(ConfigError):
        ExcitationConfig(tail_tolerance=0.0)
    with pytest.raises(ConfigError):
        ExcitationConfig(t_grid=(1.0, 0.5))
    with pytest.raises(ConfigError):
        ExcitationConfig(families=("square",))
    g = ExcitationConfig().hard_grid()
    assert len(g) == 16 and g[0] == pytest.approx(0.04) and g[-1] == 20.0


def test_invert_cloud():
    c = sample_soft_srg(static_gain(2.0), SMALL)
    inv = invert_cloud(c)
    assert np.allclose(inv.magnitude, 0.5, rtol=1e-12)
    back = invert_cloud(inv)
    assert np.array_equal(back.out_norm, c.out_norm) and np.array_equal(back.in_norm, c.in_norm)


def test_invert_matches_swapped_roles():
    cfg = SMALL
    U1, U2 = generate_pairs(cfg, "windowed", 1, 0, 20)
    Y1, Y2 = evaluate_batch(lag(), U1, cfg.dt), evaluate_batch(lag(), U2, cfg.dt)
    fwd = cloud_from_trajectories(U1, Y1, U2, Y2, cfg.dt, "soft")
    swapped = cloud_from_trajectories(Y1, U1, Y2, U2, cfg.dt, "soft")
    assert np.max(np.abs(invert_cloud(fwd).z - swapped.z)) <= 1e-12


def test_scale_cloud():
    c = sample_soft_srg(lag(), SMALL)
    assert np.array_equal(scale_cloud(c, 1.0).out_norm, c.out_norm)
    with pytest.raises(DomainError):
        scale_cloud(c, 0.0)
    for tau in (0.1, 0.5, 3.0):
        direct = sample_soft_srg(Scale(tau, lag()), SMALL)
        assert np.max(np.abs(scale_cloud(c, tau).z - direct.z)) <= 1e-12
        a = invert_cloud(scale_cloud(c, tau)).z
        b = scale_cloud(invert_cloud(c), 1 / tau).z
        assert np.allclose(a, b, rtol=1e-14)


def test_negate_cloud():
    c = polar([1.0, 2.0], [0.3, 2.0])
    assert np.allclose(negate_cloud(c).z, -np.conj(c.z))


def test_cloud_distances():
    assert cloud_min_distance(polar(1, 0), polar(3, 0)).value == pytest.approx(2.0)
    assert cloud_min_distance(polar(1, math.pi / 2), polar(1, math.pi / 2)).value == pytest.approx(0.0, abs=1e-15)
    assert cloud_min_distance(polar(1, math.pi / 2), polar(1, math.pi)).value == pytest.approx(math.sqrt(2))
    # conjugate branch: j vs -j is closer through conj
    d = points_min_distance(np.array([1j]), np.array([0.1 - 1j]))
    assert d.value == pytest.approx(0.1)
    with pytest.raises(EmptyCloudError):
        cloud_min_distance(polar([], []), polar(1, 0))


def test_merge_and_kind_check():
    a = polar(1, 0)
    assert len(merge_clouds(a, polar([2, 3], [0, 1]))) == 3
    with pytest.raises(DomainError):
        merge_clouds(a, polar(1, 0, kind="hard"))


def test_json_and_csv_export(integrator_hard):
    doc = cloud_to_json(integrator_hard)
    assert doc["conjugate_symmetric"] is True and doc["kind"] == "hard"
    p = doc["points"][0]
    assert set(p) == {"re", "im", "kind", "T", "pair_id"}
    back = cloud_from_json(json.loads(json.dumps(doc)))
    assert np.allclose(back.z, integrator_hard.z, rtol=1e-12, atol=1e-15)
    csv = cloud_to_csv(integrator_hard).splitlines()
    assert csv[0] == "re,im,kind,T,pair_id" and len(csv) == len(integrator_hard) + 1


def test_soft_export_has_null_T():
    doc = cloud_to_json(polar(1, 0.5))
    assert doc["points"][0]["T"] is None


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 100), st.floats(0, math.pi)), min_size=1, max_size=20),
       st.floats(0.01, 100))
def test_scale_invert_algebra(pts, tau):
    mag, ang = zip(*pts)
    c = polar(mag, ang)
    lhs = invert_cloud(scale_cloud(c, tau)).z
    rhs = scale_cloud(invert_cloud(c), 1 / tau).z
    assert np.allclose(lhs, rhs, rtol=1e-12)
    assert np.array_equal(invert_cloud(invert_cloud(c)).z, c.z)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 10), st.floats(0, math.pi)), min_size=1, max_size=10),
       st.lists(st.tuples(st.floats(0.01, 10), st.floats(0, math.pi)), min_size=1, max_size=10))
def test_cloud_distance_symmetric_and_conjugate_aware(p, q):
    a, b = polar(*zip(*p)), polar(*zip(*q))
    d1, d2 = cloud_min_distance(a, b).value, cloud_min_distance(b, a).value
    assert d1 == pytest.approx(d2, abs=1e-12)
    brute = min(min(abs(z - w), abs(z - np.conj(w))) for z in a.z for w in b.z)
    assert d1 == pytest.approx(brute, abs=1e-12)
