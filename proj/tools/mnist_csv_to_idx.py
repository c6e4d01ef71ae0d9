#!/usr/bin/env python3
"""Convert a CSV of MNIST rows (784 pixels then label) into gzipped IDX files."""
import argparse
import csv
import gzip
import io
import struct
import zipfile


def read_rows(path, member):
    if path.endswith(".whl") or path.endswith(".zip"):
        raw = zipfile.ZipFile(path).read(member)
    else:
        raw = open(path, "rb").read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return list(csv.reader(io.StringIO(raw.decode())))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("source", help="CSV, CSV.gz, or a wheel/zip containing one")
    ap.add_argument("--member", default="mlxtend/data/data/mnist_5k.csv.gz")
    ap.add_argument("--out", default="data/mnist-5k")
    args = ap.parse_args()

    rows = read_rows(args.source, args.member)
    pixels = bytearray()
    labels = bytearray()
    for r in rows:
        vals = [int(float(v)) for v in r]
        if len(vals) != 785:
            raise SystemExit(f"row has {len(vals)} values, expected 785")
        pixels.extend(vals[:784])
        labels.append(vals[784])
    n = len(rows)
    images = struct.pack(">IIII", 0x803, n, 28, 28) + bytes(pixels)
    lab = struct.pack(">II", 0x801, n) + bytes(labels)
    # mtime=0 keeps the archives reproducible
    for name, payload in (("images-idx3-ubyte.gz", images), ("labels-idx1-ubyte.gz", lab)):
        with open(f"{args.out}/{name}", "wb") as f:
            f.write(gzip.compress(payload, mtime=0))
    print(f"wrote {n} images to {args.out}")


if __name__ == "__main__":
    main()
