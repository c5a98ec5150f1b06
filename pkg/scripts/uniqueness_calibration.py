"""False-failure rate of the uniqueness harness over many seeds.

Compares Lebesgue intensity on [0, 1) sampled as one component against
the same intensity split into three components (same law), and against
itself. Each seed runs one Bonferroni family of ring-hitting tests plus
one fidi test; the fraction of failing seeds estimates the family-wise
error rate, which should stay at or below alpha.
"""

import argparse
import math
import time

from crsets.laws import FidiSpec, uniqueness_check
from crsets.models import lebesgue_model, split_lebesgue_model
from crsets.setalg import dyadic_sets


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--seeds", type=int, default=1000)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--alpha", type=float, default=0.01)
    args = p.parse_args()
    a = lebesgue_model()
    b = split_lebesgue_model([(0, 1, 0.5), (0, 0.5, 0.5), (0.5, 1, 0.5)])
    ring = dyadic_sets(6)
    spec = FidiSpec(dyadic_sets(7)[3:7], cap=3)
    for label, m2 in (("single vs split", b), ("single vs single", a)):
        start = time.perf_counter()
        fails = sum(not uniqueness_check(a, m2, ring, spec, args.n, args.depth, s, args.alpha)["pass"]
                    for s in range(args.seeds))
        rate = fails / args.seeds
        se = math.sqrt(max(rate * (1 - rate), 1e-12) / args.seeds)
        print(f"{label:17s} failures {fails}/{args.seeds} = {rate:.4f} (se {se:.4f}), "
              f"alpha {args.alpha}, {time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()
