"""Positive feedback around an integrator must not be certified.

Builds hard clouds of both blocks from the loop's own trajectories, reports
their distance and the certificate, then shows the simulated divergence.
"""

import argparse

import numpy as np

from srg_lab.certifier import certify_hard, checklist_from_specs
from srg_lab.errors import DivergenceError
from srg_lab.feedback import SolverConfig, _solve_values, solve_feedback
from srg_lab.operators import Integrator, identity
from srg_lab.sampler import cloud_from_trajectories, invert_cloud
from srg_lab.signals import SampledSignal


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--horizon", type=float, default=20.0)
    args = ap.parse_args()

    P, C, dt = Integrator(), identity(), args.dt
    n = int(round(args.horizon / dt)) + 1
    d = np.zeros((2, n, 1))
    d[0, :10], d[1, :10] = 1.0, 0.5
    s = _solve_values(P, C, d, dt, SolverConfig(), stop_on_divergence=True)
    grid = np.geomspace(10 * dt, (s.u1.shape[1] - 1) * dt, 16)
    cloud_P = cloud_from_trajectories(s.u1[0], s.y1[0], s.u1[1], s.y1[1], dt, "hard", grid)
    cloud_C = cloud_from_trajectories(s.u2[0], s.y2[0], s.u2[1], s.y2[1], dt, "hard", grid)
    cert = certify_hard(cloud_P, invert_cloud(cloud_C), checklist_from_specs(P, C, "hard_separation"))
    print(f"cloud distance {cert.margin:.3e}; verdict {cert.verdict}: {cert.reason}")
    print(f"discrete closed-loop pole 1/(1 - dt) = {1 / (1 - dt):.6f}")
    try:
        solve_feedback(P, C, SampledSignal(dt, d[0]))
        print("no divergence detected")
    except DivergenceError as exc:
        print(f"simulation: {exc}")


if __name__ == "__main__":
    main()
