"""Print the two-photon interference dip for a range of overlaps."""
import argparse
import math

import numpy as np

from eprw.optics import hom_scan, visibility


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--coherence-length", type=float, default=110.0, help="micrometres")
    parser.add_argument("--visibilities", type=float, nargs="+", default=[1.0, 0.885, 0.5])
    args = parser.parse_args()
    delays = np.linspace(-2.5, 2.5, 11) * args.coherence_length
    print("delay_um " + " ".join(f"V={v:<6}" for v in args.visibilities))
    curves = [hom_scan(delays, args.coherence_length, math.sqrt(v)) for v in args.visibilities]
    for i, d in enumerate(delays):
        print(f"{d:8.1f} " + " ".join(f"{c[i]:8.5f}" for c in curves))
    print("fitted  " + " ".join(f"{visibility(c):8.5f}" for c in curves))


if __name__ == "__main__":
    main()
