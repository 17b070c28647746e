#!/usr/bin/env python3
"""Cut a desk-scale MNIST subset: the first N training digits plus the full test set.

Source files are the raw IDX files shipped in the npm package `mnist-data`
1.2.6 (data/ directory), which are byte-identical to the original MNIST
distribution.

Usage:
    npm pack mnist-data@1.2.6 && tar xzf mnist-data-1.2.6.tgz
    python3 tools/mnist_subset.py package/data data/mnist --train-count 10000

Archives are written with a zero gzip mtime so regeneration is byte-identical.
"""

import argparse
import gzip
import hashlib
import pathlib
import struct

# md5 of the uncompressed original files.
EXPECTED_MD5 = {
    "train-images-idx3-ubyte": "6bbc9ace898e44ae57da46a324031adb",
    "train-labels-idx1-ubyte": "a25bea736e30d166cdddb491f175f624",
    "t10k-images-idx3-ubyte": "2646ac647ad5339dbf082846283269ea",
    "t10k-labels-idx1-ubyte": "27ae3e4e09519cfbb04c329615203637",
}


def read_checked(src: pathlib.Path, name: str) -> bytes:
    data = (src / name).read_bytes()
    digest = hashlib.md5(data).hexdigest()
    if digest != EXPECTED_MD5[name]:
        raise SystemExit(f"{name}: md5 {digest} does not match the MNIST original")
    return data


def cut(images: bytes, labels: bytes, count: int):
    magic, n, rows, cols = struct.unpack(">IIII", images[:16])
    lmagic, ln = struct.unpack(">II", labels[:8])
    assert magic == 0x803 and lmagic == 0x801 and n == ln
    count = min(count, n)
    pixels = rows * cols
    img = struct.pack(">IIII", magic, count, rows, cols) + images[16:16 + count * pixels]
    lab = struct.pack(">II", lmagic, count) + labels[8:8 + count]
    return img, lab, count


def write_gz(path: pathlib.Path, payload: bytes):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(payload)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("src", type=pathlib.Path)
    parser.add_argument("out_dir", type=pathlib.Path)
    parser.add_argument("--train-count", type=int, default=10000)
    parser.add_argument("--test-count", type=int, default=10000)
    args = parser.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    for prefix, count in (("train", args.train_count), ("t10k", args.test_count)):
        images = read_checked(args.src, f"{prefix}-images-idx3-ubyte")
        labels = read_checked(args.src, f"{prefix}-labels-idx1-ubyte")
        img, lab, n = cut(images, labels, count)
        write_gz(args.out_dir / f"{prefix}-images-idx3-ubyte.gz", img)
        write_gz(args.out_dir / f"{prefix}-labels-idx1-ubyte.gz", lab)
        print(f"{prefix}: {n}")


if __name__ == "__main__":
    main()
