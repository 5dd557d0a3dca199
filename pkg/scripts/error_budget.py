"""Fidelity of the corrected state against overlap and source fidelity.

Walks the ideal -> mismatch -> imperfect-source ladder and then scans each
imperfection alone, so the size of each contribution can be read off.
"""
import argparse
import math

import numpy as np

from eprw.metrics import fidelity_to_pure
from eprw.protocol import experiment_params, optimal_params, run_conversion
from eprw.qstate import make_state

W3 = make_state((1, 4, 6), "W3")


def fidelity(params, xi=1.0, f12=1.0, f34=1.0) -> float:
    rho, _ = run_conversion(params, f12, f34, xi)
    return fidelity_to_pure(rho, W3)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--optimal", action="store_true")
    parser.add_argument("--visibility", type=float, default=0.885)
    parser.add_argument("--f12", type=float, default=0.967)
    parser.add_argument("--f34", type=float, default=0.976)
    args = parser.parse_args()
    params = optimal_params() if args.optimal else experiment_params()
    xi = math.sqrt(args.visibility)
    print(f"mu={params.mu:.6f} nu={params.nu:.6f}")
    print(f"ideal                 {fidelity(params):.4f}")
    print(f"mode mismatch         {fidelity(params, xi):.4f}")
    print(f"+ imperfect sources   {fidelity(params, xi, args.f12, args.f34):.4f}")
    print("\nvisibility  fidelity")
    for v in np.linspace(1.0, 0.5, 6):
        print(f"{v:10.3f}  {fidelity(params, math.sqrt(v)):.4f}")
    print("\nsource F    fidelity (both sources, perfect overlap)")
    for f in np.linspace(1.0, 0.9, 6):
        print(f"{f:9.3f}  {fidelity(params, 1.0, f, f):.4f}")


if __name__ == "__main__":
    main()
