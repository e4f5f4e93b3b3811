#!/usr/bin/env python3
"""Write the diabetes data (n=442, d=10) as CSV with a header row.

Uses the copy bundled with scikit-learn; the unscaled variant is written and
standardization is left to the loader.
"""
import argparse
import csv
import sys


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/diabetes.csv")
    args = parser.parse_args()
    try:
        from sklearn.datasets import load_diabetes
    except ImportError:
        print("scikit-learn is required: pip install scikit-learn", file=sys.stderr)
        return 1
    data = load_diabetes(scaled=False)
    names = ["age", "sex", "bmi", "bp", "s1", "s2", "s3", "s4", "s5", "s6"]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ["y"])
        for row, target in zip(data.data, data.target):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(target))])
    print(f"wrote {len(data.target)} rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
