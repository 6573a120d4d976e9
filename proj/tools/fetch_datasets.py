#!/usr/bin/env python3
"""Populate the dataset cache used by atattack.

MNIST comes from the `mnist-data` npm package (raw IDX files). CIFAR10 comes
from the `tfjs-cifar10` npm package, which stores each split as a lossless PNG
with one 32x32 RGB image per row; it is re-encoded into the standard
`cifar-10-batches-bin` layout (1 label byte + 3072 channel-planar bytes).

Every produced file is checked against data/checksums.json.
"""
import argparse
import hashlib
import json
import os
import pathlib
import shutil
import subprocess
import tarfile
import tempfile

import numpy as np
from PIL import Image

ROOT = pathlib.Path(__file__).resolve().parent.parent
MANIFEST = ROOT / "data" / "checksums.json"

MNIST_FILES = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
]
CIFAR_BATCHES = [f"data_batch_{i}" for i in range(1, 6)] + ["test_batch"]


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def npm_unpack(package, version, workdir):
    out = subprocess.run(["npm", "pack", f"{package}@{version}"], cwd=workdir,
                         check=True, capture_output=True, text=True)
    tgz = pathlib.Path(workdir) / out.stdout.strip().splitlines()[-1]
    dest = pathlib.Path(workdir) / package
    with tarfile.open(tgz) as tf:
        tf.extractall(dest)
    return dest / "package"


def fetch_mnist(cache, workdir):
    src = npm_unpack("mnist-data", "1.2.6", workdir) / "data"
    dst = cache / "mnist"
    dst.mkdir(parents=True, exist_ok=True)
    for name in MNIST_FILES:
        shutil.copyfile(src / name, dst / name)


def fetch_cifar10(cache, workdir):
    src = npm_unpack("tfjs-cifar10", "1.1.1", workdir)
    dst = cache / "cifar10" / "cifar-10-batches-bin"
    dst.mkdir(parents=True, exist_ok=True)
    train_labels = json.loads((src / "train_lables.json").read_text())
    test_labels = json.loads((src / "test_lables.json").read_text())
    for i, name in enumerate(CIFAR_BATCHES):
        pixels = np.asarray(Image.open(src / f"{name}.png").convert("RGB"), dtype=np.uint8)
        assert pixels.shape == (10000, 1024, 3), pixels.shape
        labels = test_labels if name == "test_batch" else train_labels[i * 10000:(i + 1) * 10000]
        planar = pixels.transpose(0, 2, 1).reshape(10000, 3072)
        records = np.concatenate([np.asarray(labels, dtype=np.uint8)[:, None], planar], axis=1)
        records.tofile(dst / f"{name}.bin")


def verify(cache, write):
    files = [f"mnist/{n}" for n in MNIST_FILES] + \
            [f"cifar10/cifar-10-batches-bin/{n}.bin" for n in CIFAR_BATCHES]
    sums = {f: sha256(cache / f) for f in files if (cache / f).exists()}
    if write:
        MANIFEST.write_text(json.dumps({"version": 1, "sha256": sums}, indent=2) + "\n")
        return True
    expected = json.loads(MANIFEST.read_text())["sha256"]
    ok = True
    for f, digest in sums.items():
        if expected.get(f) != digest:
            print(f"checksum mismatch: {f}")
            ok = False
    return ok


def main():
    default_cache = os.environ.get("ATATTACK_CACHE", str(pathlib.Path.home() / ".cache" / "atattack"))
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cache-dir", default=default_cache)
    ap.add_argument("--datasets", nargs="+", default=["mnist", "cifar10"], choices=["mnist", "cifar10"])
    ap.add_argument("--write-manifest", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    cache = pathlib.Path(args.cache_dir)
    with tempfile.TemporaryDirectory() as workdir:
        if "mnist" in args.datasets:
            fetch_mnist(cache, workdir)
        if "cifar10" in args.datasets:
            fetch_cifar10(cache, workdir)
    if not verify(cache, args.write_manifest):
        raise SystemExit(1)
    print(f"datasets ready under {cache}")


if __name__ == "__main__":
    main()
