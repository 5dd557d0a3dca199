"""Coarse text map of the success probability over the beam-splitter parameters."""
import argparse

import numpy as np

from eprw.protocol import H5, V5, optimal_params, success_probability, success_probability_grid

SHADES = " .:-=+*#%@"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=41)
    parser.add_argument("--branch", choices=[H5, V5], default=H5)
    args = parser.parse_args()
    g = np.linspace(0, 1, args.points)
    mu, nu = np.meshgrid(g, g, indexing="ij")
    p = success_probability_grid(mu, nu, args.branch)
    print(f"rows: nu from 1 down to 0, columns: mu from 0 to 1 (max {p.max():.4f})")
    for j in range(args.points - 1, -1, -1):
        print("".join(SHADES[min(int(p[i, j] / 0.15 * (len(SHADES) - 1)), len(SHADES) - 1)]
                      for i in range(args.points)))
    opt = optimal_params()
    print(f"optimum ({opt.mu:.4f}, {opt.nu:.4f}) -> {success_probability(opt, args.branch):.4f}")


if __name__ == "__main__":
    main()
