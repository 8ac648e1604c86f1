"""Soft and hard SRG clouds of the integrator.

The soft cloud should hug the imaginary axis while the hard cloud spreads
over the closed right half-plane. Writes both clouds as JSON and one SVG.
"""

import argparse
import json
import os

import numpy as np

from srg_lab import plotting
from srg_lab.operators import Integrator
from srg_lab.regions import HalfPlane, ImaginaryAxis, containment_report
from srg_lab.sampler import ExcitationConfig, cloud_to_json, sample_hard_srg, sample_soft_srg


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/integrator")
    ap.add_argument("--pairs", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = ExcitationConfig(n_pairs=args.pairs, seed=args.seed)
    soft = sample_soft_srg(Integrator(), cfg)
    hard = sample_hard_srg(Integrator(), cfg)
    summary = {
        "soft_points": len(soft),
        "soft_max_abs_cos": float(np.max(np.abs(np.cos(soft.angle)))),
        "hard_points": len(hard),
        "hard_min_cos": float(np.min(np.cos(hard.angle))),
        "hard_max_real_part": float(np.max(hard.z.real)),
        "hard_in_closed_rhp": containment_report(hard, HalfPlane(0.0, "ge")).fraction_inside,
        "hard_on_axis": containment_report(hard, ImaginaryAxis()).fraction_inside,
    }
    os.makedirs(args.out, exist_ok=True)
    for name, cloud in (("soft", soft), ("hard", hard)):
        with open(os.path.join(args.out, f"{name}.json"), "w") as fh:
            json.dump(cloud_to_json(cloud), fh, indent=2, sort_keys=True)
    svg = plotting.render_svg(clouds=[(hard, "hard SRG"), (soft, "soft SRG")], title="integrator")
    with open(os.path.join(args.out, "integrator.svg"), "w") as fh:
        fh.write(svg)
    print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
