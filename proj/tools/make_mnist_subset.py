# SPDX-License-Identifier: Apache-2.0
"""Writes a class-balanced N-row subset of a 784-pixel MNIST CSV as IDX files.

The CSV holds one sample per row: 784 pixel values in 0..255 followed by the
label. Gzipped input and a .whl archive containing mnist_5k.csv.gz (as shipped
in the mlxtend wheel) are both accepted.
"""

import argparse
import csv
import gzip
import io
import struct
import zipfile
from pathlib import Path


def read_rows(source: Path):
    if source.suffix == ".whl":
        with zipfile.ZipFile(source) as whl:
            name = next(n for n in whl.namelist() if n.endswith("mnist_5k.csv.gz"))
            raw = gzip.decompress(whl.read(name))
    elif source.suffix == ".gz":
        raw = gzip.decompress(source.read_bytes())
    else:
        raw = source.read_bytes()
    for row in csv.reader(io.StringIO(raw.decode("ascii"))):
        if row:
            yield [int(float(v)) for v in row]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("source", type=Path)
    parser.add_argument("--count", type=int, default=2000)
    parser.add_argument("--out", type=Path, default=Path("tests/data"))
    args = parser.parse_args()

    if args.count % 10:
        raise SystemExit("--count must be a multiple of 10")
    per_class = args.count // 10
    by_class = {c: [] for c in range(10)}
    for row in read_rows(args.source):
        if len(row) != 785:
            raise SystemExit(f"expected 785 columns, got {len(row)}")
        if len(by_class[row[784]]) < per_class:
            by_class[row[784]].append(row)
    if any(len(v) < per_class for v in by_class.values()):
        raise SystemExit(f"source has fewer than {per_class} rows of some digit")
    # Interleave digits so any prefix stays roughly balanced.
    rows = [by_class[c][i] for i in range(per_class) for c in range(10)]

    args.out.mkdir(parents=True, exist_ok=True)
    images = bytearray(struct.pack(">IIII", 0x803, len(rows), 28, 28))
    labels = bytearray(struct.pack(">II", 0x801, len(rows)))
    for row in rows:
        images += bytes(row[:784])
        labels.append(row[784])
    stem = f"mnist{len(rows)}"
    (args.out / f"{stem}-images-idx3-ubyte").write_bytes(images)
    (args.out / f"{stem}-labels-idx1-ubyte").write_bytes(labels)


if __name__ == "__main__":
    main()
