"""Write the bundled MNIST subset as IDX files.

Source: mnist_5k.csv.gz shipped with the mlxtend package (5,000 MNIST
training images, 500 per class, 784 pixel columns then the label).
Takes the first 200 images of each class for training and the next 50 for
testing, interleaved class by class.
"""

import argparse
import gzip
import struct
import zipfile
from pathlib import Path

TRAIN_PER_CLASS = 200
TEST_PER_CLASS = 50


def read_rows(source):
    if source.suffix == ".whl":
        with zipfile.ZipFile(source) as zf:
            raw = gzip.decompress(zf.read("mlxtend/data/data/mnist_5k.csv.gz"))
    else:
        raw = gzip.decompress(source.read_bytes())
    rows = []
    for line in raw.decode().splitlines():
        values = [int(v) for v in line.split(",")]
        rows.append((bytes(values[:784]), values[784]))
    return rows


def interleave(by_class, start, count):
    out = []
    for i in range(start, start + count):
        for label in range(10):
            out.append((by_class[label][i], label))
    return out


def write_idx(prefix, items):
    images = struct.pack(">IIII", 0x803, len(items), 28, 28) + b"".join(p for p, _ in items)
    labels = struct.pack(">II", 0x801, len(items)) + bytes(l for _, l in items)
    Path(prefix + "-images-idx3-ubyte").write_bytes(images)
    Path(prefix + "-labels-idx1-ubyte").write_bytes(labels)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("source", type=Path, help="mlxtend wheel or mnist_5k.csv.gz")
    ap.add_argument("--out", type=Path, default=Path("data"))
    args = ap.parse_args()

    by_class = {d: [] for d in range(10)}
    for pixels, label in read_rows(args.source):
        by_class[label].append(pixels)
    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(str(args.out / "mnist-subset-train"), interleave(by_class, 0, TRAIN_PER_CLASS))
    write_idx(str(args.out / "mnist-subset-test"), interleave(by_class, TRAIN_PER_CLASS, TEST_PER_CLASS))


if __name__ == "__main__":
    main()
