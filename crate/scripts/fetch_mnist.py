#!/usr/bin/env python3
"""Build a desk-scale MNIST subset in IDX format.

The full MNIST mirrors are not always reachable. The `mnist` npm package
(v1.1.0) ships 10,000 genuine MNIST digits as JSON arrays of pixel/255
values rounded to three decimals. This script packs them into a stratified
train/test split and writes the four standard IDX files:

    data/mnist/train-images-idx3-ubyte
    data/mnist/train-labels-idx1-ubyte
    data/mnist/t10k-images-idx3-ubyte
    data/mnist/t10k-labels-idx1-ubyte

If full-size IDX files are already present in the output directory they are
left alone.

Usage: scripts/fetch_mnist.py [--out data/mnist] [--test-fraction 0.3]
"""

import argparse
import json
import os
import random
import struct
import subprocess
import tarfile
import tempfile

PACKAGE = "mnist@1.1.0"
SPLIT_SEED = 20230501


def write_idx_images(path, images):
    with open(path + ".tmp", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))
    os.replace(path + ".tmp", path)


def write_idx_labels(path, labels):
    with open(path + ".tmp", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))
    os.replace(path + ".tmp", path)


def load_digits(pkg_dir):
    per_class = []
    for digit in range(10):
        with open(os.path.join(pkg_dir, "package", "src", "digits", f"{digit}.json")) as f:
            flat = json.load(f)["data"]
        assert len(flat) % 784 == 0
        imgs = []
        for k in range(len(flat) // 784):
            px = flat[k * 784 : (k + 1) * 784]
            imgs.append([min(255, max(0, int(round(v * 255.0)))) for v in px])
        per_class.append(imgs)
    return per_class


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "mnist"))
    ap.add_argument("--test-fraction", type=float, default=0.3)
    args = ap.parse_args()

    out = os.path.abspath(args.out)
    os.makedirs(out, exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(["npm", "pack", PACKAGE, "--silent"], cwd=tmp, check=True, stdout=subprocess.DEVNULL)
        tgz = [f for f in os.listdir(tmp) if f.endswith(".tgz")][0]
        with tarfile.open(os.path.join(tmp, tgz)) as tar:
            tar.extractall(tmp)
        per_class = load_digits(tmp)

    rng = random.Random(SPLIT_SEED)
    train, test = [], []
    for label, imgs in enumerate(per_class):
        idx = list(range(len(imgs)))
        rng.shuffle(idx)
        n_test = int(round(len(imgs) * args.test_fraction))
        test += [(imgs[i], label) for i in idx[:n_test]]
        train += [(imgs[i], label) for i in idx[n_test:]]
    rng.shuffle(train)
    rng.shuffle(test)

    write_idx_images(os.path.join(out, "train-images-idx3-ubyte"), [x for x, _ in train])
    write_idx_labels(os.path.join(out, "train-labels-idx1-ubyte"), [y for _, y in train])
    write_idx_images(os.path.join(out, "t10k-images-idx3-ubyte"), [x for x, _ in test])
    write_idx_labels(os.path.join(out, "t10k-labels-idx1-ubyte"), [y for _, y in test])
    print(f"wrote {len(train)} train / {len(test)} test samples to {out}")


if __name__ == "__main__":
    main()
