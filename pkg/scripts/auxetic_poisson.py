"""Effective Poisson ratio of double-V and orthogonal-strut patches."""

import argparse

from bladelattice.beams import INCONEL_718, BeamModel, effective_poisson
from bladelattice.lattice import build_lattice, extract_beam_model
from bladelattice.splines import trilinear_box
from bladelattice.tiles import TileSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cells", type=int, default=3)
    ap.add_argument("--cell-mm", type=float, default=1.0)
    ap.add_argument("--strain", type=float, default=0.01)
    ap.add_argument("--angle", type=float, default=None, help="re-entrant angle in degrees")
    args = ap.parse_args()

    n = args.cells
    side = n * args.cell_mm * 1e-3
    patch = trilinear_box(hi=(side, side, side))
    kw = {} if args.angle is None else {"reentrant_angle": args.angle}
    for vertical in (True, False):
        spec = TileSpec("auxetic_double_v", strut_radius=0.05e-3, include_vertical_strut=vertical, **kw)
        g = build_lattice(patch, (n, n, n), spec, growth_axis=2).beam_graph
        nu = effective_poisson(BeamModel(g.nodes, g.edges, g.radii, INCONEL_718), args.strain, axis=2)
        print(f"double_v{'_vertical' if vertical else ''}_nu={nu:.6f}")
    cross = build_lattice(patch, (n, n, n), TileSpec("cross_axis", arm_thickness=0.1), compose_solids=False)
    model = extract_beam_model(cross, 2)
    for axis in range(3):
        print(f"orthogonal_nu_axis{axis}={effective_poisson(model, args.strain, axis=axis):.3e}")


if __name__ == "__main__":
    main()
