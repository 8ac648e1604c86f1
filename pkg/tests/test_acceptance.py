"""Acceptance criteria 1 to 9, one test each.

Each test prints a single PASS/FAIL line (also collected into the terminal
summary) before asserting.
"""

import json
import math
import os
import time

import numpy as np

from conftest import ACCEPTANCE_LINES, DELTA, EPSILON, fixture_controller, fixture_plant
from srg_lab.certifier import (MARGIN_FLOOR, AssumptionChecklist, certify_hard, certify_passivity_corollary,
                               certify_soft, checklist_from_specs, grid_spacing_ok, homotopy_step_bound)
from srg_lab.cli import main
from srg_lab.errors import DivergenceError
from srg_lab.feedback import GainConfig, SolverConfig, _solve_values, estimate_loop_incremental_gain, solve_feedback
from srg_lab.operators import Integrator, Scale, evaluate_batch, identity, lag
from srg_lab.regions import (Disk, HalfPlane, containment_report, make_sector_disk_D, region_distance,
                             sampled_distance)
from srg_lab.sampler import (ExcitationConfig, cloud_from_trajectories, generate_pairs, invert_cloud,
                             resolve_mode, sample_hard_srg, sample_soft_srg, scale_cloud)
from srg_lab.signals import SampledSignal
from test_cli import CONFIGS


def report(n, title, ok, detail):
    line = f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_criterion_1_integrator_dichotomy():
    t0 = time.perf_counter()
    cfg = ExcitationConfig()
    soft = sample_soft_srg(Integrator(), cfg)
    hard = sample_hard_srg(Integrator(), cfg)
    elapsed = time.perf_counter() - t0
    soft_cos = float(np.max(np.abs(np.cos(soft.angle))))
    hard_cos = np.cos(hard.angle)
    reach = float(np.max(hard.magnitude * hard_cos))
    ok = (len(soft) >= 200 and cfg.tail_tolerance == 1e-4 and soft_cos <= 0.02
          and float(np.min(hard_cos)) >= -1e-9 and reach >= 0.05 and elapsed < 10)
    report(1, "integrator soft on jR, hard fills closed RHP", ok,
           f"{len(soft)} soft pts, max|cos|={soft_cos:.4f}, min hard cos={np.min(hard_cos):.2e}, "
           f"max gamma*cos={reach:.3f}, {elapsed:.1f}s")


def test_criterion_2_soft_equals_hard_at_horizon():
    ok, checked = True, 0
    for spec in (fixture_plant(), Integrator(), fixture_controller()):
        cfg = ExcitationConfig(n_pairs=100)
        soft, hard = sample_soft_srg(spec, cfg), sample_hard_srg(spec, cfg)
        H = cfg.hard_grid()[-1]
        at_h = hard.horizon_T == H
        table = {int(p): (o, i, a) for p, o, i, a in zip(hard.pair_id[at_h], hard.out_norm[at_h],
                                                        hard.in_norm[at_h], hard.angle[at_h])}
        for p, o, i, a in zip(soft.pair_id, soft.out_norm, soft.in_norm, soft.angle):
            checked += 1
            ok &= table.get(int(p)) == (o, i, a)
    report(2, "soft point equals hard point at T = horizon", bool(ok), f"{checked} points, exact equality")


def test_criterion_3_sector_disk_distance():
    D = make_sector_disk_D(0.25, 0.25)
    lhp = HalfPlane(0.0, "le")
    analytic = region_distance(D, lhp)
    sampled = sampled_distance(D, lhp, 4096)[0]
    ok = (analytic.method == "analytic" and abs(analytic.value - 0.25) <= 1e-6
          and abs(sampled - 0.25) <= 1e-6 and abs(sampled - analytic.value) <= 1e-4)
    report(3, "dist(D(0.25, 0.25), Re <= 0) = 0.25", ok,
           f"analytic {analytic.value:.12g}, sampled {sampled:.12g}")


def test_criterion_4_lag_circle(lag_soft):
    cfg = ExcitationConfig(n_pairs=500, seed=7)
    ids = lag_soft.pair_id
    U1, U2 = generate_pairs(cfg, resolve_mode(lag(), cfg), 1, 0, cfg.n_pairs)
    # oracle: raw inner products of the increments, no library gain/phase code
    dU = (U1 - U2)[ids, :, 0]
    dY = (evaluate_batch(lag(), U1, cfg.dt) - evaluate_batch(lag(), U2, cfg.dt))[ids, :, 0]
    uu = cfg.dt * np.sum(dU * dU, axis=1)
    uy = cfg.dt * np.sum(dU * dY, axis=1)
    yy = cfg.dt * np.sum(dY * dY, axis=1)
    # |z - 1/2| <= 1/2 + s  <=>  gamma^2 - gamma cos <= s + s^2, with gamma cos = uy/uu, gamma^2 = yy/uu
    slack = 0.02 + 0.02 ** 2
    oracle_ok = np.all(yy - uy <= slack * uu)
    z_oracle = (uy + 1j * np.sqrt(np.maximum(uu * yy - uy ** 2, 0.0))) / uu
    agree = float(np.max(np.abs(z_oracle - lag_soft.z)))
    dist = float(np.max(np.abs(lag_soft.z - 0.5)))
    ok = len(lag_soft) >= 500 and dist <= 0.52 and bool(oracle_ok) and agree <= 1e-9
    report(4, "lag soft SRG in disk |z - 1/2| <= 0.52", ok,
           f"{len(lag_soft)} pts, max |z - 1/2| = {dist:.5f}, oracle agreement {agree:.1e}")


def test_criterion_5_srg_algebra():
    cfg = ExcitationConfig(n_pairs=60, horizon=10.0)
    U1, U2 = generate_pairs(cfg, "windowed", 1, 0, cfg.n_pairs)
    Y1, Y2 = evaluate_batch(lag(), U1, cfg.dt), evaluate_batch(lag(), U2, cfg.dt)
    fwd = cloud_from_trajectories(U1, Y1, U2, Y2, cfg.dt, "soft")
    swapped = cloud_from_trajectories(Y1, U1, Y2, U2, cfg.dt, "soft")
    inv_err = float(np.max(np.abs(invert_cloud(fwd).z - swapped.z)))
    worst = 0.0
    for spec in (lag(), fixture_controller()):
        base = sample_soft_srg(spec, cfg)
        for tau in (0.1, 0.5, 1.0):
            direct = sample_soft_srg(Scale(tau, spec), cfg)
            worst = max(worst, float(np.max(np.abs(scale_cloud(base, tau).z - direct.z))))
    ok = inv_err <= 1e-12 and worst <= 1e-12
    report(5, "inverse and scaling match recomputation", ok, f"invert err {inv_err:.1e}, scale err {worst:.1e}")


def test_criterion_6_passivity_end_to_end(plant_hard, controller_hard):
    t0 = time.perf_counter()
    # indices on a dense grid: Re H >= delta + eps |H|^2 for H(jw) = 0.25 + 1/(1 + jw)
    w = np.concatenate([[0.0], np.geomspace(1e-4, 1e4, 200001)])
    H = 0.25 + 1.0 / (1.0 + 1j * w)
    slack = float(np.min(H.real - DELTA - EPSILON * np.abs(H) ** 2))
    D = make_sector_disk_D(DELTA, EPSILON)
    frac = containment_report(plant_hard, D).fraction_inside
    cert = certify_passivity_corollary(fixture_plant(), fixture_controller(), DELTA, EPSILON,
                                       cloud_P=plant_hard, cloud_C=controller_hard)
    est = estimate_loop_incremental_gain(fixture_plant(), fixture_controller(),
                                         GainConfig(amplitudes=(0.01, 0.1, 1.0, 10.0)))
    elapsed = time.perf_counter() - t0
    ok = (slack >= 0 and frac == 1.0 and cert.verdict == "certified" and cert.margin >= DELTA - 1e-6
          and math.isfinite(est.sup_gain) and not est.divergent and elapsed < 60)
    report(6, "passivity corollary fixture certified", ok,
           f"index slack {slack:.3f}, containment {frac}, margin {cert.margin:.4f}, "
           f"sup gain {est.sup_gain:.3f}, {elapsed:.1f}s")


def test_criterion_7_falsification():
    P, C = Integrator(), identity()
    dt, n = 0.01, 2001
    # loop trajectories for pulse disturbances of different size
    d = np.zeros((2, n, 1))
    d[0, :10] = 1.0
    d[1, :10] = 0.5
    s = _solve_values(P, C, d, dt, SolverConfig(), stop_on_divergence=True)
    m = s.u1.shape[1]
    grid = np.geomspace(0.1, (m - 1) * dt, 16)
    cloud_P = cloud_from_trajectories(s.u1[0], s.y1[0], s.u1[1], s.y1[1], dt, "hard", grid)
    cloud_C = cloud_from_trajectories(s.u2[0], s.y2[0], s.u2[1], s.y2[1], dt, "hard", grid)
    checklist = checklist_from_specs(P, C, "hard_separation")
    cert = certify_hard(cloud_P, invert_cloud(cloud_C), checklist)
    # unstable pole oracle: y_k (1 - dt) = y_{k-1} + dt d_k
    pole = 1.0 / (1.0 - dt)
    try:
        solve_feedback(P, C, SampledSignal(dt, d[0]))
        flagged = False
    except DivergenceError:
        flagged = True
    est = estimate_loop_incremental_gain(P, C, GainConfig(amplitudes=(1.0,), pairs_per_amplitude=2))
    growth = float(s.y1[0, -1, 0] / s.y1[0, -2, 0])
    ok = (cert.margin <= MARGIN_FLOOR and cert.verdict != "certified" and pole > 1
          and abs(growth - pole) <= 1e-9 and flagged and est.divergent)
    report(7, "positive integrator loop is not certified", ok,
           f"cloud distance {cert.margin:.2e}, verdict {cert.verdict}, pole {pole:.4f}, "
           f"observed growth {growth:.4f}, divergence flagged {flagged}")


def test_criterion_8_homotopy_mechanics():
    rows, ok = [], True
    cases = [((2.0, 0.5), (-1.0, 0.4)), ((1.0, 0.3), (-2.0, 1.0)), ((3.0, 1.0), (-0.5, 0.2)),
             ((2.0, 0.5), (1.0, 0.1))]
    grids = [tuple(np.geomspace(0.2, 1.0, k)) for k in (2, 5, 20, 80)] + [tuple(np.linspace(0.05, 1.0, 40))]
    asserted = AssumptionChecklist.blank("soft_separation").update(
        {n: "asserted_by_user" for n in ("well_posed", "P_stable", "C_stable", "tau_wellposed")})
    upgrades = 0
    for (c1, r1), (c2, r2) in cases:
        for g in grids:
            cert = certify_soft(Disk(c1, r1), Disk(c2, r2), g, asserted)
            exact = [max(0.0, abs(c1 - c2 / t) - r1 - r2 / t) for t in g]
            ok &= np.max(np.abs(np.array(cert.tau_margins) - exact)) <= 1e-9
            M = abs(c2) + r2
            var = max((1 / a - 1 / b) * M for a, b in zip(g, g[1:]))
            tail = (abs(c2) - r2) / g[0] - (abs(c1) + r1) > 0
            expect = cert.margin > var and tail
            ok &= (cert.continuum == "covered") == expect
            upgrades += cert.continuum == "covered"
            rows.append(cert.continuum)
    # step bound mechanics: grid spacing below 1/(c0 * gain) is accepted
    mu = homotopy_step_bound(2.0, 1.0)
    ok &= grid_spacing_ok(tuple(np.linspace(0.1, 1.0, 10)), mu)[0] and not grid_spacing_ok((0.5, 1.0), 0.4)[0]
    ok &= 0 < upgrades < len(rows)
    report(8, "tau-grid margins match scaled-disk formula, upgrade rule exact", bool(ok),
           f"{len(rows)} certificates, {upgrades} upgraded")


def test_criterion_9_cli_determinism(tmp_path):
    configs = dict(CONFIGS)
    configs["plot"] = {"regions": [{"region": {"variant": "sector_disk_D", "delta": 0.25, "epsilon": 0.25}}],
                       "witnesses": [{"z1": [0.25, 0.0], "z2": [0.0, 0.0]}]}
    mismatched = []
    for command, cfg in sorted(configs.items()):
        path = tmp_path / f"{command}.json"
        path.write_text(json.dumps(cfg))
        outs = []
        for run in ("a", "b"):
            out = tmp_path / f"{command}-{run}"
            main([command, "--config", str(path), "--out", str(out), "--seed", "3"])
            outs.append({p: (out / p).read_bytes() for p in sorted(os.listdir(out))})
        if outs[0] != outs[1] or not outs[0]:
            mismatched.append(command)
    report(9, "every CLI command is byte-deterministic", not mismatched,
           f"{len(configs)} commands, mismatched {mismatched}")
