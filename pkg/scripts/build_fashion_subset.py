"""Build the FashionMNIST IDX subset in data/ from the `fashion-mnist` npm package.

The npm package (``npm pack fashion-mnist``) ships all 70,000 images as
per-class JSON lists of 784 uint8 pixels. Per class, the first 6,000 are
treated as the training pool and the remainder as the test pool;
malformed (empty) entries are skipped.

    npm pack fashion-mnist && tar xzf fashion-mnist-*.tgz
    python scripts/build_fashion_subset.py package/src/clothes --train-per-class 200 --test-per-class 100
"""

import argparse
import json
from pathlib import Path

import numpy as np

from hosnn.data import write_idx

TRAIN_POOL = 6000


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("clothes_dir", type=Path)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "data")
    ap.add_argument("--train-per-class", type=int, default=200)
    ap.add_argument("--test-per-class", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    splits = {"train": ([], []), "test": ([], [])}
    for label in range(10):
        rows = json.loads((args.clothes_dir / f"{label}.json").read_text())["data"]
        # a few entries in the package are empty lists
        pixels = np.array([r for r in rows if len(r) == 784], dtype=np.uint8)
        train_idx = rng.choice(TRAIN_POOL, args.train_per_class, replace=False)
        test_idx = TRAIN_POOL + rng.choice(len(pixels) - TRAIN_POOL, args.test_per_class, replace=False)
        for split, idx in (("train", train_idx), ("test", test_idx)):
            splits[split][0].append(pixels[np.sort(idx)])
            splits[split][1].append(np.full(len(idx), label, dtype=np.uint8))

    args.out.mkdir(parents=True, exist_ok=True)
    for split, (images, labels) in splits.items():
        images, labels = np.concatenate(images), np.concatenate(labels)
        order = rng.permutation(len(labels))
        write_idx(args.out / f"fashion-{split}-images-idx3-ubyte.gz", images[order].reshape(-1, 28, 28), compress=True)
        write_idx(args.out / f"fashion-{split}-labels-idx1-ubyte.gz", labels[order], compress=True)
        print(f"{split}: {len(labels)} samples")


if __name__ == "__main__":
    main()
