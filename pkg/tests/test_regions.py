import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from srg_lab.errors import ConfigError, DomainError, IndeterminateDistanceError
from srg_lab.operators import StaticNonlinearity
from srg_lab.regions import (Disk, HalfPlane, HullOfCloud, ImaginaryAxis, Inverted, Negated, Scaled, SectorDisk,
                             Union, containment_report, invert_region, make_sector_disk_D, negate_region,
                             region_distance, region_from_dict, sampled_distance, scale_region)
from srg_lab.sampler import ExcitationConfig, sample_soft_srg


def probes(n=1000, seed=0, scale=4.0):
    rng = np.random.default_rng(seed)
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def test_sector_disk_shape():
    D = make_sector_disk_D(0.25, 0.25)
    assert D.angle_bound == pytest.approx(math.pi / 3)
    assert D.radius == pytest.approx(4.0)
    seg = make_sector_disk_D(0.5, 0.5)
    assert seg.angle_bound == 0.0
    assert seg.contains(1.0) and seg.contains(2.0) and seg.contains(0.5)
    assert not seg.contains(5.0) and not seg.contains(1.0 + 0.01j)
    assert D.contains(0.25) and not D.contains(0.2)
    assert D.contains(2 * np.exp(1j * math.pi / 3 * 0.99)) and not D.contains(2 * np.exp(1j * math.pi / 3 * 1.01))


def test_sector_disk_rejects_bad_indices():
    with pytest.raises(DomainError):
        make_sector_disk_D(0.5, 0.6)
    with pytest.raises(DomainError):
        make_sector_disk_D(0.0, 0.5)
    with pytest.raises(DomainError):
        make_sector_disk_D(0.2, -1.0)


def test_closed_rhp_membership():
    rhp = HalfPlane(0.0, "ge")
    assert rhp.contains(1j) and rhp.contains(-1j) and rhp.contains(0.0)
    assert not rhp.contains(-0.1)
    assert not HalfPlane(0.0, "ge", punctured=True).contains(0.0)


def test_invert_half_plane_to_disk():
    inv = invert_region(HalfPlane(1.0, "ge"))
    assert isinstance(inv, Disk) and inv.center == 0.5 and inv.radius == 0.5 and inv.punctured
    t = np.linspace(-50, 50, 401)
    assert np.all(inv.contains(1.0 / (1.0 + 1j * t)))
    assert invert_region(HalfPlane(0.0, "ge")).contains(1j)
    assert isinstance(invert_region(Disk(1.0, 1.0)), HalfPlane)


def test_invert_disk_mobius():
    inv = invert_region(Disk(2.0, 1.0))
    assert inv.center == pytest.approx(2 / 3) and inv.radius == pytest.approx(1 / 3)
    th = np.linspace(0, 2 * np.pi, 64)
    circle = 2.0 + np.exp(1j * th)
    assert np.max(np.abs(np.abs(1 / circle - inv.center) - inv.radius)) <= 1e-12


@pytest.mark.parametrize("region", [Disk(2.0, 1.0), HalfPlane(1.0, "ge"), HalfPlane(-0.5, "le"),
                                    make_sector_disk_D(0.25, 0.25), Disk(-3.0, 0.5)],
                         ids=lambda r: type(r).__name__)
def test_inversion_is_involution(region):
    z = probes()
    z = z[np.abs(z) > 1e-3]
    back = invert_region(invert_region(region))
    # skip probes sitting on the boundary where rounding decides membership
    d, _ = region.point_distance(z)
    far = np.asarray(d) > 1e-9
    assert np.array_equal(np.asarray(back.contains(z))[far], np.asarray(region.contains(z))[far])


def test_generic_inverted_membership():
    D = make_sector_disk_D(0.25, 0.25)
    inv = invert_region(D)
    assert isinstance(inv, Inverted) and inv.bounded
    z = probes(seed=1, scale=1.0)
    assert np.array_equal(np.asarray(inv.contains(z)), np.asarray(D.contains(1 / z)))
    assert invert_region(inv) is D


def test_scale_and_negate():
    assert scale_region(Disk(1.0, 1.0), 2.0) == Disk(2.0, 2.0)
    assert scale_region(HalfPlane(0.5, "le"), 4.0) == HalfPlane(2.0, "le")
    with pytest.raises(DomainError):
        scale_region(Disk(1.0, 1.0), 0.0)
    assert negate_region(HalfPlane(1.0, "ge")) == HalfPlane(-1.0, "le")
    D = make_sector_disk_D(0.25, 0.25)
    z = probes(seed=2)
    assert np.array_equal(np.asarray(negate_region(D).contains(z)), np.asarray(D.contains(-z)))
    assert isinstance(negate_region(D), Negated) and negate_region(negate_region(D)) is D
    S = scale_region(D, 3.0)
    assert np.array_equal(np.asarray(S.contains(z)), np.asarray(D.contains(z / 3.0)))


def test_distance_examples():
    D = make_sector_disk_D(0.25, 0.25)
    r = region_distance(D, HalfPlane(0.0, "le"))
    assert r.value == pytest.approx(0.25, abs=1e-12) and r.method == "analytic"
    s = sampled_distance(D, HalfPlane(0.0, "le"), 4096)
    assert s[0] == pytest.approx(0.25, abs=1e-9)
    r = region_distance(Disk(0.0, 1.0), HalfPlane(3.0, "ge"))
    assert r.value == 2.0 and r.z1 == 1 and r.z2 == 3
    assert region_distance(Disk(0.0, 1.0), Disk(0.5, 1.0)).value == 0.0
    assert region_distance(ImaginaryAxis(), HalfPlane(0.0, "ge")).value == 0.0


def test_sampled_path_converges():
    D = make_sector_disk_D(0.25, 0.25)
    other = Disk(-1.0, 0.5)
    r = region_distance(D, other)
    assert r.method == "sampled-boundary" and r.converged
    assert r.value == pytest.approx(0.75, abs=1e-6)
    # witness sits on the cut segment near the real axis
    assert abs(r.z1 - 0.25) <= 1e-3


def test_extended_regions_are_indeterminate():
    ext = invert_region(Disk(0.0, 1.0))
    assert ext.extended
    with pytest.raises(IndeterminateDistanceError):
        region_distance(ext, Disk(5.0, 1.0))
    with pytest.raises(IndeterminateDistanceError):
        sampled_distance(HalfPlane(1.0, "ge"), Scaled(2.0, ImaginaryAxis()))


def test_union_and_hull():
    u = Union((Disk(0.0, 1.0), Disk(10.0, 1.0)))
    r = region_distance(u, HalfPlane(5.0, "ge"))
    assert r.value == pytest.approx(0.0)
    r = region_distance(HalfPlane(3.0, "ge"), Union((Disk(0.0, 1.0), Disk(-10.0, 1.0))))
    assert r.value == pytest.approx(2.0) and r.z2 == 1
    h = HullOfCloud(np.array([1 + 1j, 2 + 0j]), pad=0.1)
    assert h.contains(1 - 1j) and h.contains(2.05) and not h.contains(1.5)
    assert region_distance(h, HalfPlane(0.0, "le")).value == pytest.approx(0.9)


def test_containment_reports(integrator_hard, integrator_soft):
    cfg = ExcitationConfig(n_pairs=60, horizon=10.0)
    tanh = sample_soft_srg(StaticNonlinearity("tanh_gain", {"k": 1.0}), cfg)
    assert containment_report(tanh, HalfPlane(0.0, "ge")).fraction_inside == 1.0
    rep = containment_report(integrator_hard, HalfPlane(0.0, "ge"))
    assert rep.fraction_inside == 1.0 and rep.worst_violation_distance == 0.0
    ax = containment_report(integrator_hard, ImaginaryAxis())
    assert ax.fraction_inside < 1.0 and ax.violating_pair_ids
    bad = containment_report(integrator_soft, HalfPlane(1.0, "ge"))
    assert bad.fraction_inside == 0.0 and bad.worst_violation_distance == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("region", [
    Disk(1.0, 0.5, punctured=True), HalfPlane(-1.0, "le"), make_sector_disk_D(0.2, 0.3), ImaginaryAxis(),
    Scaled(2.0, make_sector_disk_D(0.2, 0.3)), Inverted(make_sector_disk_D(0.2, 0.3)),
    Negated(make_sector_disk_D(0.2, 0.3)), HullOfCloud(np.array([1 + 1j, 0.5 + 0j]), 0.05),
    Union((Disk(1.0, 0.2), HalfPlane(-2.0, "le"))),
], ids=lambda r: type(r).__name__)
def test_json_roundtrip(region):
    d = region.to_dict()
    back = region_from_dict(json.loads(json.dumps(d)))
    assert back.to_dict() == d
    z = probes(seed=3)
    assert np.array_equal(np.asarray(back.contains(z)), np.asarray(region.contains(z)))


def test_json_strict():
    with pytest.raises(ConfigError, match="unknown keys"):
        region_from_dict({"variant": "disk", "center": 0, "radius": 1, "colour": "red"})
    with pytest.raises(ConfigError, match="variant"):
        region_from_dict({"variant": "ellipse"})
    with pytest.raises(ConfigError, match="delta"):
        region_from_dict({"variant": "sector_disk_D", "delta": 0.9, "epsilon": 0.9})
    with pytest.raises(ConfigError, match=r"members\[1\]"):
        region_from_dict({"variant": "union", "members": [{"variant": "imaginary_axis"}, {"variant": "x"}]})


# ---------------------------------------------------------------------------
# properties

centers = st.floats(-5, 5)
radii = st.floats(0.01, 3)
disks = st.builds(Disk, centers, radii)
half_planes = st.builds(HalfPlane, st.floats(-5, 5), st.sampled_from(["ge", "le"]))
sectors = st.tuples(st.floats(0.01, 2), st.floats(0.01, 2)).filter(
    lambda p: 2 * math.sqrt(p[0] * p[1]) <= 1).map(lambda p: SectorDisk(*p))
bounded = st.one_of(disks, sectors)
any_region = st.one_of(disks, sectors, half_planes)


@settings(max_examples=80, deadline=None)
@given(any_region, any_region)
def test_distance_symmetric(a, b):
    try:
        r1 = region_distance(a, b)
    except IndeterminateDistanceError:
        assume(False)
    r2 = region_distance(b, a)
    assert r1.value == pytest.approx(r2.value, abs=1e-9)


@settings(max_examples=80, deadline=None)
@given(bounded, any_region)
def test_witnesses_realise_distance(a, b):
    r = region_distance(a, b)
    for z, reg in ((r.z1, a), (r.z2, b)):
        assert reg.point_distance(np.array([z]))[0][0] <= 1e-6 * max(1.0, abs(z))
    gap = min(abs(r.z1 - r.z2), abs(r.z1 - np.conj(r.z2)))
    assert gap == pytest.approx(r.value, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(centers, radii, st.floats(0, 2), any_region)
def test_distance_monotone_under_inclusion(c, r, grow, b):
    small, big = Disk(c, r), Disk(c, r + grow)
    assert region_distance(big, b).value <= region_distance(small, b).value + 1e-9


@settings(max_examples=60, deadline=None)
@given(bounded, st.one_of(disks, half_planes))
def test_analytic_agrees_with_sampling(a, b):
    r = region_distance(a, b)
    assume(r.method == "analytic")
    s = sampled_distance(a, b, 4096)
    assert s[0] == pytest.approx(r.value, abs=1e-4)


@settings(max_examples=20, deadline=None)
@given(sectors, st.integers(0, 2**31))
def test_strict_passivity_set_inside_sector(D, seed):
    # points with Re z >= delta + eps |z|^2 (unit-normalised strict passivity) must lie in D
    rng = np.random.default_rng(seed)
    z = D.radius * (rng.uniform(0, 1, 10000) + 1j * rng.uniform(-1, 1, 10000))
    strict = z[z.real >= D.delta + D.epsilon * np.abs(z) ** 2]
    assert np.all(D.contains(strict))
    # and D itself stays inside Re z >= delta and |z| <= 1/eps
    inside = z[np.asarray(D.contains(z))]
    assert np.all(inside.real >= D.delta - 1e-9) and np.all(np.abs(inside) <= D.radius + 1e-9)
