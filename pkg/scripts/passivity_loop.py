"""Passivity certificate and closed-loop gain for 0.25 + 1/(s+1) against -tanh.

Prints the certificate verdict and margin, the sampled loop gain per
amplitude, and writes the certificate and a plot.
"""

import argparse
import json
import os

from srg_lab import plotting
from srg_lab.certifier import certify_passivity_corollary
from srg_lab.feedback import GainConfig, estimate_loop_incremental_gain
from srg_lab.operators import Negate, ParallelSum, StaticNonlinearity, lag, static_gain
from srg_lab.regions import HalfPlane, make_sector_disk_D
from srg_lab.sampler import ExcitationConfig, invert_cloud, sample_hard_srg


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/passivity")
    ap.add_argument("--delta", type=float, default=0.15)
    ap.add_argument("--epsilon", type=float, default=0.4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    P = ParallelSum((static_gain(0.25), lag()))
    C = Negate(StaticNonlinearity("tanh_gain", {"k": 1.0}))
    cfg = ExcitationConfig(seed=args.seed)
    cloud_P, cloud_C = sample_hard_srg(P, cfg), sample_hard_srg(C, cfg)
    cert = certify_passivity_corollary(P, C, args.delta, args.epsilon, cloud_P, cloud_C, seed=args.seed)
    gain = estimate_loop_incremental_gain(P, C, GainConfig(seed=args.seed))

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "certificate.json"), "w") as fh:
        json.dump(cert.to_json(), fh, indent=2, sort_keys=True)
    D = make_sector_disk_D(args.delta, args.epsilon)
    svg = plotting.render_svg([(cloud_P, "P hard"), (invert_cloud(cloud_C), "inverse C hard")],
                              [(D, "sector disk"), (HalfPlane(0.0, "le"), "Re <= 0")],
                              [cert.witnesses], title="passivity loop")
    with open(os.path.join(args.out, "passivity.svg"), "w") as fh:
        fh.write(svg)
    print(f"verdict {cert.verdict}, margin {cert.margin:.4f} ({cert.reason})")
    for amp, g in gain.per_amplitude.items():
        print(f"amplitude {amp:>6g}: sampled loop gain {g:.4f}")


if __name__ == "__main__":
    main()
