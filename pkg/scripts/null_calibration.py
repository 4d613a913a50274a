"""Check the energy-distance null threshold against its nominal level.

Draws pairs of same-distribution samples and counts how often the statistic
exceeds the resampled 95% threshold; the rate should be near 5%. A shifted
alternative shows the power at the same sizes.
"""

import argparse

import numpy as np

from ou_diffuse.stats import energy_distance, energy_threshold


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=300)
    ap.add_argument("--trials", type=int, default=400)
    ap.add_argument("--shift", type=float, default=0.3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    m = args.size
    thr = energy_threshold(rng.standard_normal((4 * m, 2)), m, m, n_splits=200, seed=args.seed)
    null = [energy_distance(rng.standard_normal((m, 2)), rng.standard_normal((m, 2)))
            for _ in range(args.trials)]
    alt = [energy_distance(rng.standard_normal((m, 2)), args.shift + rng.standard_normal((m, 2)))
           for _ in range(args.trials)]
    rate = np.mean(np.array(null) > thr)
    se = np.sqrt(0.05 * 0.95 / args.trials)
    print(f"threshold {thr:.5f}; false rejection rate {rate:.3f} (nominal 0.050 +/- {2 * se:.3f})")
    print(f"rejection rate under a shift of {args.shift:g}: {np.mean(np.array(alt) > thr):.3f}")


if __name__ == "__main__":
    main()
