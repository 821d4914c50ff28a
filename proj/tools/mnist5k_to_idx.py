#!/usr/bin/env python3
"""Convert the 5000-digit MNIST subset shipped inside the mlxtend wheel to IDX.

usage: mnist5k_to_idx.py MLXTEND_WHEEL OUT_DIR

Writes OUT_DIR/images-idx3-ubyte.gz and OUT_DIR/labels-idx1-ubyte.gz in the
standard big-endian IDX layout. Row order is preserved (the subset is sorted
by class; loaders shuffle with a seeded permutation before splitting).
"""
import gzip
import struct
import sys
import zipfile


def main():
    wheel, out_dir = sys.argv[1], sys.argv[2]
    with zipfile.ZipFile(wheel) as z:
        text = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz")).decode()
    rows = [line.split(",") for line in text.splitlines() if line]
    pixels = bytearray()
    labels = bytearray()
    for row in rows:
        pixels.extend(int(float(v)) for v in row[:-1])
        labels.append(int(float(row[-1])))
    n = len(rows)
    with gzip.GzipFile(f"{out_dir}/images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        f.write(bytes(pixels))
    with gzip.GzipFile(f"{out_dir}/labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(bytes(labels))


if __name__ == "__main__":
    main()
