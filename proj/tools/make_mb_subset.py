#!/usr/bin/env python3
"""Build a desk-scale MNIST-basic subset in amat format.

Uses the 5000-digit MNIST sample shipped inside the mlxtend wheel
(mlxtend/data/data/mnist_5k.csv.gz, 784 pixel columns then the label).
Writes <out>/mb_subset_train.amat (4000 rows) and <out>/mb_subset_test.amat
(1000 rows) with pixels scaled to [0, 1].
"""

import argparse
import glob
import gzip
import io
import os
import random
import subprocess
import sys
import tempfile
import zipfile

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def fetch_csv_gz(wheel):
    if wheel is None:
        tmp = tempfile.mkdtemp()
        subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, "mlxtend"],
                       check=True)
        wheel = glob.glob(os.path.join(tmp, "mlxtend-*.whl"))[0]
    with zipfile.ZipFile(wheel) as z:
        return z.read(MEMBER)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--wheel", help="local mlxtend wheel (downloaded with pip when omitted)")
    ap.add_argument("--out", default="data")
    ap.add_argument("--test-size", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    rows = []
    with gzip.open(io.BytesIO(fetch_csv_gz(args.wheel)), "rt") as f:
        for line in f:
            fields = line.strip().split(",")
            if len(fields) != 785:
                continue
            pixels = [int(float(v)) for v in fields[:784]]
            rows.append((pixels, int(float(fields[784]))))
    random.Random(args.seed).shuffle(rows)

    os.makedirs(args.out, exist_ok=True)

    def write(path, subset):
        with open(path, "w") as out:
            for pixels, label in subset:
                out.write(" ".join("0" if p == 0 else repr(round(p / 255.0, 6)) for p in pixels))
                out.write(" %d\n" % label)

    test = rows[:args.test_size]
    train = rows[args.test_size:]
    write(os.path.join(args.out, "mb_subset_train.amat"), train)
    write(os.path.join(args.out, "mb_subset_test.amat"), test)
    print("wrote %d train / %d test rows to %s" % (len(train), len(test), args.out))


if __name__ == "__main__":
    main()
