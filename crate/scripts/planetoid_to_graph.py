#!/usr/bin/env python3
"""Convert a Planetoid citation dataset (ind.<name>.* files) to the
line-oriented graph format read by `hdgcn`.

Usage: planetoid_to_graph.py <dir> <name> <out.graph> [--raw-features]

Uses the standard split: the first |y| nodes train, the next 500 validate,
and the nodes listed in ind.<name>.test.index test. Features are
row-normalised unless --raw-features is given. Needs numpy and scipy to
unpickle the inputs.
"""

import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load(d, name, part):
    with open(Path(d) / f"ind.{name}.{part}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def main(argv):
    args = [a for a in argv if not a.startswith("--")]
    raw = "--raw-features" in argv
    if len(args) != 3:
        sys.exit(__doc__)
    d, name, out = args
    x, y, tx, ty, allx, ally, graph = (load(d, name, p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_idx = [int(l) for l in open(Path(d) / f"ind.{name}.test.index")]
    test_sorted = sorted(test_idx)

    # Citeseer has isolated test nodes missing from tx; pad them with zeros.
    lo, hi = test_sorted[0], test_sorted[-1]
    if hi - lo + 1 != len(test_idx):
        full_tx = sp.lil_matrix((hi - lo + 1, x.shape[1]))
        full_tx[np.array(test_sorted) - lo, :] = tx
        tx = full_tx
        full_ty = np.zeros((hi - lo + 1, y.shape[1]))
        full_ty[np.array(test_sorted) - lo, :] = ty
        ty = full_ty

    features = sp.vstack((allx, tx)).tolil()
    features[test_idx, :] = features[test_sorted, :]
    labels = np.vstack((ally, ty))
    labels[test_idx, :] = labels[test_sorted, :]
    features = sp.csr_matrix(features)
    if not raw:
        rowsum = np.asarray(features.sum(1)).ravel()
        inv = np.where(rowsum > 0, 1.0 / np.where(rowsum > 0, rowsum, 1.0), 0.0)
        features = sp.diags(inv) @ features
        features = sp.csr_matrix(features)

    n = features.shape[0]
    edges = set()
    for i, nbrs in graph.items():
        for j in nbrs:
            if i != j and i < n and j < n:
                edges.add((min(i, j), max(i, j)))

    train = range(len(y))
    val = range(len(y), len(y) + 500)
    with open(out, "w") as f:
        f.write(f"n {n}\nd {features.shape[1]}\n")
        for i, j in sorted(edges):
            f.write(f"e {i} {j} 1\n")
        for i in range(n):
            row = features.getrow(i)
            if row.nnz:
                cells = " ".join(f"{c}:{v!r}" for c, v in zip(row.indices, row.data))
                f.write(f"x {i} {cells}\n")
        for i in range(n):
            if labels[i].any():
                f.write(f"y {i} {int(labels[i].argmax())}\n")
        for split, idx in (("train", train), ("val", val), ("test", test_sorted)):
            for i in idx:
                f.write(f"m {i} {split}\n")


if __name__ == "__main__":
    main(sys.argv[1:])
