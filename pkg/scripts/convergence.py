"""Step-size study of the implicit midpoint rule on the hyperbolic flow q' = q, p' = -p.

Prints the endpoint error at t = 1 from (1, 1) and the ratio between
successive halvings; a second-order method shows ratios near 4.
"""

import argparse
import math

import numpy as np

from singcot import PointRef, build_local_system
from singcot.dynamics import integrate_flow


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=float, nargs="+", default=[8e-3, 4e-3, 2e-3, 1e-3, 5e-4])
    args = ap.parse_args()
    system = build_local_system("h", radius=5.0, glued=False)
    chart = sorted(system.functions)[0]
    exact = np.array([math.e, 1 / math.e])
    prev = None
    print(f"{'step':>10} {'error':>12} {'ratio':>8}  {'e*h^2/12':>12}")
    for h in args.steps:
        end = integrate_flow(system, 0, PointRef.of(chart, (1.0, 1.0)), 1.0, h).end.array
        err = float(np.max(np.abs(end - exact)))
        ratio = f"{prev / err:8.3f}" if prev else " " * 8
        print(f"{h:10.1e} {err:12.3e} {ratio}  {math.e * h * h / 12:12.3e}")
        prev = err


if __name__ == "__main__":
    main()
