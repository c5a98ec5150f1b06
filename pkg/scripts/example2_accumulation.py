"""Example 2: how often the count-threshold detector flags [0, 1) as
carrying infinitely many points, against the exact Φ(1) − Φ(0)."""

import argparse

from crsets.models import (detect_infinite, example2_model, harmonic_threshold,
                           prob_infinite_count_example2, sample_batch)
from crsets.setalg import IntervalSet


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=6)
    p.add_argument("--depths", default="50,200,500,1000,2000,5000")
    args = p.parse_args()
    a = IntervalSet.of((0, 1))
    exact = prob_infinite_count_example2(a)
    depths = [int(d) for d in args.depths.split(",")]
    batch = sample_batch(example2_model(), args.n, max(depths), args.seed)
    print(f"exact P(N = inf) = {exact:.5f}")
    print("depth  threshold  detected  diff")
    for d in depths:
        rate = float(detect_infinite(batch.truncated(d), a).mean())
        print(f"{d:5d}  {harmonic_threshold(d):9d}  {rate:8.4f}  {rate - exact:+.4f}")


if __name__ == "__main__":
    main()
