#!/usr/bin/env python3
"""Generate the 20-row synthetic stand-in for the diabetes CSV (same schema)."""
import argparse
import csv

import numpy as np

NAMES = ["age", "sex", "bmi", "bp", "s1", "s2", "s3", "s4", "s5", "s6"]
MEANS = [48.5, 1.47, 26.4, 94.6, 189.1, 115.4, 49.8, 4.07, 4.64, 91.3]
SDS = [13.1, 0.5, 4.4, 13.8, 34.6, 30.4, 12.9, 1.29, 0.52, 11.5]
# Per-standard-deviation effects on y.
EFFECTS = [0.0, -11.0, 24.0, 15.0, -9.0, 0.0, -8.0, 5.0, 26.0, 3.0]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="tests/fixtures/diabetes_synthetic.csv")
    parser.add_argument("--rows", type=int, default=20)
    parser.add_argument("--seed", type=int, default=20240117)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)
    z = rng.standard_normal((args.rows, len(NAMES)))
    z[:, 5] = 0.8 * z[:, 4] + 0.6 * z[:, 5]  # s1/s2 correlation
    z[:, 6] = -0.5 * z[:, 7] + 0.87 * z[:, 6]  # s3/s4 anticorrelation
    x = np.asarray(MEANS) + z * np.asarray(SDS)
    x[:, 1] = np.where(z[:, 1] > 0, 2.0, 1.0)
    y = 152.0 + z @ np.asarray(EFFECTS) + 54.0 * rng.standard_normal(args.rows)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(NAMES + ["y"])
        for row, target in zip(x, y):
            w.writerow([f"{v:.4f}" for v in row] + [f"{target:.1f}"])


if __name__ == "__main__":
    main()
