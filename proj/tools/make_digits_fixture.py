#!/usr/bin/env python3
"""Build the bundled offline digit fixture.

Source: the UCI "Optical Recognition of Handwritten Digits" 8x8 set as
shipped with scikit-learn (CC BY 4.0). Images are bilinearly upsampled to
16x16, rescaled to 0..255 and written as gzip-compressed IDX files.
"""
import gzip
import struct
import sys
from pathlib import Path

import numpy as np
from scipy.ndimage import zoom
from sklearn.datasets import load_digits


def write_idx_images(path, images):
    n, rows, cols = images.shape
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main(out_dir, n_test=500, seed=7):
    digits = load_digits()
    imgs = digits.images / 16.0
    up = np.stack([np.clip(zoom(im, 2, order=1), 0.0, 1.0) for im in imgs])
    up = np.rint(up * 255.0)
    order = np.random.default_rng(seed).permutation(len(up))
    up, labels = up[order], digits.target[order]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_idx_images(out / "train-images-idx3-ubyte.gz", up[n_test:])
    write_idx_labels(out / "train-labels-idx1-ubyte.gz", labels[n_test:])
    write_idx_images(out / "test-images-idx3-ubyte.gz", up[:n_test])
    write_idx_labels(out / "test-labels-idx1-ubyte.gz", labels[:n_test])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/digits16")
