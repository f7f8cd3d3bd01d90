#!/usr/bin/env python3
"""Download MNIST / Fashion-MNIST IDX files into a dataset directory.

Usage:
    python scripts/fetch_datasets.py --out ./data [--dataset mnist fmnist]

Files land uncompressed under <out>/<dataset>/ with the conventional names
the benchmark expects (train-images-idx3-ubyte, ...).  Every download is
structurally verified (IDX magic, counts, dimensions) and its SHA-256 is
recorded in <out>/<dataset>/checksums.txt; later runs re-verify against the
recorded digests, so a silently changed mirror fails loudly.
"""
import argparse
import gzip
import hashlib
import os
import struct
import sys
import urllib.request

MIRRORS = {
    "mnist": "https://storage.googleapis.com/cvdf-datasets/mnist/",
    "fmnist": "https://fashion-mnist.s3-website.eu-central-1.amazonaws.com/",
}

FILES = {
    "train-images-idx3-ubyte": (0x00000803, 60000),
    "train-labels-idx1-ubyte": (0x00000801, 60000),
    "t10k-images-idx3-ubyte": (0x00000803, 10000),
    "t10k-labels-idx1-ubyte": (0x00000801, 10000),
}


def verify_idx(raw: bytes, magic: int, count: int, name: str) -> None:
    got_magic, got_count = struct.unpack(">II", raw[:8])
    if got_magic != magic:
        raise ValueError(f"{name}: magic {got_magic:#010x}, expected {magic:#010x}")
    if got_count != count:
        raise ValueError(f"{name}: count {got_count}, expected {count}")
    if magic == 0x00000803:
        rows, cols = struct.unpack(">II", raw[8:16])
        if (rows, cols) != (28, 28):
            raise ValueError(f"{name}: dims {rows}x{cols}, expected 28x28")
        expected_len = 16 + count * rows * cols
    else:
        expected_len = 8 + count
    if len(raw) != expected_len:
        raise ValueError(f"{name}: {len(raw)} bytes, expected {expected_len}")


def fetch(dataset: str, out_root: str) -> None:
    base = MIRRORS[dataset]
    out_dir = os.path.join(out_root, dataset)
    os.makedirs(out_dir, exist_ok=True)
    checksum_path = os.path.join(out_dir, "checksums.txt")
    recorded = {}
    if os.path.exists(checksum_path):
        with open(checksum_path) as fh:
            recorded = dict(line.split()[::-1] for line in fh if line.strip())

    lines = []
    for name, (magic, count) in FILES.items():
        url = base + name + ".gz"
        print(f"fetching {url}")
        raw = gzip.decompress(urllib.request.urlopen(url).read())
        verify_idx(raw, magic, count, name)
        digest = hashlib.sha256(raw).hexdigest()
        if name in recorded and recorded[name] != digest:
            raise ValueError(
                f"{name}: sha256 {digest} does not match recorded {recorded[name]}"
            )
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(raw)
        lines.append(f"{digest}  {name}")
        print(f"  ok: {len(raw)} bytes, sha256 {digest[:16]}...")

    with open(checksum_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {checksum_path}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--out", default="./data")
    parser.add_argument("--dataset", nargs="+", default=["mnist", "fmnist"],
                        choices=list(MIRRORS))
    args = parser.parse_args()
    for dataset in args.dataset:
        fetch(dataset, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
