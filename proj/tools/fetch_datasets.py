#!/usr/bin/env python3
"""Fetch MNIST and Fashion-MNIST from npm registry tarballs and write IDX files.

MNIST ships as the original IDX files inside the `mnist-data` package.
Fashion-MNIST ships as per-class JSON pixel arrays inside `fashion-mnist`; the
first 1000 non-empty samples of each class become the test split, the next 6000
the train split, and each split is interleaved with a fixed-seed shuffle.

Usage: fetch_datasets.py OUT_DIR   (creates OUT_DIR/mnist and OUT_DIR/fmnist)
"""
import io
import json
import random
import shutil
import struct
import sys
import tarfile
import urllib.request
from pathlib import Path

REGISTRY = "https://registry.npmjs.org"
MNIST_TGZ = REGISTRY + "/mnist-data/-/mnist-data-1.2.6.tgz"
FMNIST_TGZ = REGISTRY + "/fashion-mnist/-/fashion-mnist-1.1.0.tgz"
MNIST_FILES = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
]
TRAIN_PER_CLASS = 6000
TEST_PER_CLASS = 1000


def fetch(url):
    print("fetching", url, file=sys.stderr)
    with urllib.request.urlopen(url) as r:
        return tarfile.open(fileobj=io.BytesIO(r.read()), mode="r:gz")


def write_idx(out, prefix, samples):
    with open(out / f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(samples), 28, 28))
        for pixels, _ in samples:
            f.write(bytes(pixels))
    with open(out / f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 2049, len(samples)))
        f.write(bytes(label for _, label in samples))


def main():
    if len(sys.argv) != 2:
        print(__doc__, file=sys.stderr)
        return 1
    root = Path(sys.argv[1])
    mnist = root / "mnist"
    fmnist = root / "fmnist"
    mnist.mkdir(parents=True, exist_ok=True)
    fmnist.mkdir(parents=True, exist_ok=True)

    tar = fetch(MNIST_TGZ)
    for name in MNIST_FILES:
        src = tar.extractfile(f"package/data/{name}")
        with open(mnist / name, "wb") as dst:
            shutil.copyfileobj(src, dst)

    tar = fetch(FMNIST_TGZ)
    train, test = [], []
    for label in range(10):
        data = json.load(tar.extractfile(f"package/src/clothes/{label}.json"))["data"]
        # class 0 carries empty separator rows
        data = [pixels for pixels in data if pixels]
        if len(data) < TRAIN_PER_CLASS + TEST_PER_CLASS:
            raise SystemExit(f"class {label}: only {len(data)} samples")
        for i, pixels in enumerate(data[: TRAIN_PER_CLASS + TEST_PER_CLASS]):
            if len(pixels) != 784:
                raise SystemExit(f"class {label} sample {i}: {len(pixels)} pixels")
            (test if i < TEST_PER_CLASS else train).append((pixels, label))
    rng = random.Random(20210701)
    rng.shuffle(train)
    rng.shuffle(test)
    write_idx(fmnist, "train", train)
    write_idx(fmnist, "t10k", test)
    print("wrote", mnist, "and", fmnist, file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
