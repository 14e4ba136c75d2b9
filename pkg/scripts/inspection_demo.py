"""Deviation analysis of a synthetic scan of the blade against its tessellation.

The scan is the nominal sampling pushed along the normals by a fixed offset
plus uniform noise.
"""

import argparse

import numpy as np

from bladelattice.inspection import PointCloud, deviation, parse_length, sample_nominal, tolerance_verdict
from bladelattice.splines import blade_macro


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--offset", default="0.05mm")
    ap.add_argument("--noise", default="0.02mm", help="half-width of the uniform normal noise")
    ap.add_argument("--band", default="0.1mm")
    ap.add_argument("--density", type=float, default=2000.0, help="samples per metre (count = density^2 * area)")
    ap.add_argument("--bins", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    offset, noise, band = (parse_length(x) for x in (args.offset, args.noise, args.band))
    mesh, cloud = sample_nominal(blade_macro(), args.density, args.seed, resolution=16)
    rng = np.random.default_rng(args.seed + 1)
    shift = offset + rng.uniform(-noise, noise, len(cloud))
    scan = PointCloud(cloud.points + shift[:, None] * cloud.normals)
    rep = deviation(scan, mesh, args.bins)
    verdict = tolerance_verdict(rep, band)
    print(f"points={len(cloud)}")
    print(f"triangles={len(mesh.faces)}")
    for key, value in rep.stats().items():
        print(f"{key}={value}" if isinstance(value, int) else f"{key}={value:.6e}")
    print(f"passed={str(verdict.passed).lower()}")
    print(f"fraction_within={verdict.fraction:.4f}")
    print(rep.histogram_table(), end="")


if __name__ == "__main__":
    main()
