"""Write the two-blob toy dataset used by the benchmark config."""

import argparse
import os

from labelfusion.data import ensure_dir, make_blobs, write_dataset_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2800)
    ap.add_argument("--seed", type=int, default=1234)
    ap.add_argument("--positive-fraction", type=float, default=0.5)
    ap.add_argument("--separation", type=float, default=4.0)
    ap.add_argument("--out", default="data/blobs.csv")
    args = ap.parse_args()
    ds = make_blobs(args.n, args.seed, args.positive_fraction, args.separation)
    ensure_dir(os.path.dirname(args.out) or ".")
    write_dataset_csv(ds, args.out)
    print(f"{args.out}: {ds.n_samples} samples, {int(ds.true_labels.sum())} positive")


if __name__ == "__main__":
    main()
