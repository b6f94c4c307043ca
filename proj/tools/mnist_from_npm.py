#!/usr/bin/env python3
# Copyright 2026 The relurepair Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Converts the digit subset shipped in the `mnist` npm package to IDX files.

The package (MIT, Juan Cazala) carries ~10k MNIST digits as JSON arrays of
pixel intensities in [0,1] rounded to three decimals. We re-quantize to bytes,
shuffle with a fixed seed and write an 8000/2000 train/test split.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_from_npm.py package/src/digits data/mnist
"""
import json
import random
import struct
import sys
from pathlib import Path

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
SIDE = 28


def read_digits(digits_dir):
    items = []
    for label in range(10):
        raw = json.loads((Path(digits_dir) / f"{label}.json").read_text())["data"]
        count = len(raw) // (SIDE * SIDE)
        for k in range(count):
            pixels = raw[k * SIDE * SIDE:(k + 1) * SIDE * SIDE]
            items.append((bytes(min(255, max(0, round(v * 255))) for v in pixels), label))
    return items


def write_idx(out_dir, prefix, items):
    out = Path(out_dir)
    with open(out / f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, len(items), SIDE, SIDE))
        for pixels, _ in items:
            f.write(pixels)
    with open(out / f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, len(items)))
        f.write(bytes(label for _, label in items))


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    items = read_digits(sys.argv[1])
    random.Random(20210803).shuffle(items)
    Path(sys.argv[2]).mkdir(parents=True, exist_ok=True)
    write_idx(sys.argv[2], "train", items[:8000])
    write_idx(sys.argv[2], "t10k", items[8000:])
    print(f"wrote {len(items[:8000])} train / {len(items[8000:])} test items")


if __name__ == "__main__":
    main()
