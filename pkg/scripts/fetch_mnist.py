#!/usr/bin/env python3
"""Download the four MNIST IDX files into ./data (run outside the toolkit).

The experiment harness never touches the network; point the logistic config's
mnist paths (or AUXMC_MNIST_DIR for the optional tests) at the directory this
script fills.
"""

import gzip
import os
import sys
import urllib.request

MIRRORS = [
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
]
FILES = [
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
]


def main(out_dir="data"):
    os.makedirs(out_dir, exist_ok=True)
    for name in FILES:
        target = os.path.join(out_dir, name[:-3])
        if os.path.exists(target):
            print(f"{target} already present")
            continue
        last_err = None
        for mirror in MIRRORS:
            try:
                print(f"fetching {mirror}{name}")
                with urllib.request.urlopen(mirror + name, timeout=60) as resp:
                    blob = gzip.decompress(resp.read())
                with open(target, "wb") as fh:
                    fh.write(blob)
                break
            except Exception as exc:  # try the next mirror
                last_err = exc
        else:
            print(f"failed to fetch {name}: {last_err}", file=sys.stderr)
            return 1
    print(f"done; files in {out_dir}/")
    return 0


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:]))
