"""Sample the zero level of the hyperbolic loop with and without the gluing.

Without the gluing the separatrix branches run into the chart boundary;
with it they close up and the sampled level stays bounded.
"""

import argparse

from singcot import PointRef, build_hyperbolic_loop
from singcot.dynamics import sample_level


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--budget", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    start = [PointRef.of("T*W0", (0.0, 0.15))]
    for glued in (False, True):
        s = sample_level(build_hyperbolic_loop(glued=glued), [0.0], start, budget=args.budget, seed=args.seed)
        label = "glued" if glued else "un-glued"
        print(f"{label:>9}: {len(s.points)} points, boundary hits {s.n_boundary_hits}, diameter {s.diameter:.3f}")


if __name__ == "__main__":
    main()
