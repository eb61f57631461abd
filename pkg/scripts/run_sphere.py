"""Build the glued sphere system for a few values of epsilon and print a summary."""

import argparse
import math

from singcot import build_glued_sphere_system, singular_scan, verify_commutation
from singcot.cli import parse_real


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", nargs="+", default=["pi/16", "pi/10", "3pi/40"])
    ap.add_argument("--samples", type=int, default=2000)
    args = ap.parse_args()
    for text in args.epsilon:
        eps = parse_real(text)
        system = build_glued_sphere_system(eps)
        comm = verify_commutation(system, sample_count=args.samples, seed=42)
        scan = singular_scan(system)
        print(
            f"epsilon={text} ({eps:.4f}, {eps / math.pi:.4f} pi): charts {len(system.functions)}, "
            f"max |{{f,g}}| {comm.max_bracket:.1e}, focus points {len(scan.focus_points)}, "
            f"hyperbolic circles {len(scan.hyperbolic_circles)}, scan {'ok' if scan.passed else 'FAILED'}"
        )


if __name__ == "__main__":
    main()
