"""Calibration and power of the independent-increments + Poisson check.

Null: Lebesgue Poisson on [0, 1), counts on four quarters. Alternative:
exactly one uniform point (binomial, K = 1). Reports the family-wise
rejection rate under the null and the rejection rate under the
alternative.
"""

import argparse

from crsets.laws import grid_cells, independent_increments_poisson_check
from crsets.models import binomial_model, lebesgue_model, sample_batch


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--seeds", type=int, default=500)
    p.add_argument("--n", type=int, default=10_000)
    args = p.parse_args()
    cells = grid_cells(0, 1, 4)
    for label, model in (("poisson (null)", lebesgue_model()), ("binomial K=1", binomial_model(1))):
        rejected = sum(not independent_increments_poisson_check(sample_batch(model, args.n, 1, s), cells)["pass"]
                       for s in range(args.seeds))
        print(f"{label:15s} rejected {rejected}/{args.seeds} = {rejected / args.seeds:.4f}")


if __name__ == "__main__":
    main()
