"""First bending frequency of the solid-equivalent blade cantilever.

Prints the closed form, the area-reduced estimate and the beam-FE value.
"""

import argparse

import numpy as np

from bladelattice.beams import INCONEL_718, BeamModel, Section, cantilever_frequency, lowest_frequencies, scaled_frequency


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--length", type=float, default=0.090)
    ap.add_argument("--width", type=float, default=0.040)
    ap.add_argument("--thickness", type=float, default=0.00675)
    ap.add_argument("--area-reduction", type=float, default=0.26)
    ap.add_argument("--elements", type=int, default=30)
    args = ap.parse_args()

    f0 = cantilever_frequency(args.length, args.width, args.thickness, INCONEL_718)
    n = args.elements
    x = np.linspace(0, args.length, n + 1)[:, None] * [1.0, 0.0, 0.0]
    model = BeamModel(x, np.c_[np.arange(n), np.arange(1, n + 1)], np.full(n, 1e-3), INCONEL_718, [0])
    model.sections = [Section.rectangle(args.width, args.thickness, INCONEL_718.nu)] * n
    print(f"closed_form_hz={f0:.3f}")
    print(f"area_reduced_hz={scaled_frequency(f0, args.area_reduction):.3f}")
    print(f"beam_fe_hz={lowest_frequencies(model, 1)[0]:.3f}")


if __name__ == "__main__":
    main()
