#!/usr/bin/env python3
"""Convert the digit JSON tables shipped with the `mnist` npm package into IDX files.

The npm package stores each class as a flat list of 28*28 floats in [0, 1].
Items are interleaved by class (item i has label i % 10) so that any prefix of
the output is class-balanced.

usage: mnist_json_to_idx.py <package/src/digits> <count> <out-prefix>
"""
import json
import struct
import sys
from pathlib import Path


def main() -> int:
    if len(sys.argv) != 4:
        print(__doc__, file=sys.stderr)
        return 2
    digits_dir, count, prefix = Path(sys.argv[1]), int(sys.argv[2]), sys.argv[3]
    tables = [json.loads((digits_dir / f"{c}.json").read_text())["data"] for c in range(10)]
    images = bytearray()
    labels = bytearray()
    for i in range(count):
        cls, idx = i % 10, i // 10
        px = tables[cls][idx * 784:(idx + 1) * 784]
        if len(px) != 784:
            raise SystemExit(f"class {cls} has fewer than {idx + 1} samples")
        images += bytes(min(255, max(0, round(v * 255))) for v in px)
        labels.append(cls)
    Path(prefix + "-images-idx3-ubyte").write_bytes(
        struct.pack(">IIII", 0x803, count, 28, 28) + images)
    Path(prefix + "-labels-idx1-ubyte").write_bytes(struct.pack(">II", 0x801, count) + labels)
    return 0


if __name__ == "__main__":
    sys.exit(main())
