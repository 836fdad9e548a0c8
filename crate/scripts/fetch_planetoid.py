#!/usr/bin/env python3
"""Download a Planetoid citation graph and write the text inputs of `cgc convert`.

    python3 scripts/fetch_planetoid.py cora --out data/raw/cora
    cgc convert --edges data/raw/cora/edges.txt --features data/raw/cora/features.csv \
        --labels data/raw/cora/labels.txt --train data/raw/cora/train.txt \
        --val data/raw/cora/val.txt --test data/raw/cora/test.txt --out data/cora

Uses the public split: 20 labels per class for training, the next 500 nodes for
validation, and the 1000 listed test nodes. Pass `--raw DIR` to read already
downloaded `ind.<name>.*` files instead of fetching them.
"""

import argparse
import pickle
import sys
import urllib.request
from pathlib import Path

import numpy as np
import scipy.sparse as sp

BASE_URL = "https://raw.githubusercontent.com/kimiyoung/planetoid/master/data"
PARTS = ["x", "y", "tx", "ty", "allx", "ally", "graph", "test.index"]


def fetch(name: str, raw: Path) -> None:
    raw.mkdir(parents=True, exist_ok=True)
    for part in PARTS:
        target = raw / f"ind.{name}.{part}"
        if not target.exists():
            print(f"fetching {target.name}", file=sys.stderr)
            urllib.request.urlretrieve(f"{BASE_URL}/ind.{name}.{part}", target)


def load(name: str, raw: Path):
    objs = {}
    for part in PARTS[:-1]:
        with open(raw / f"ind.{name}.{part}", "rb") as f:
            objs[part] = pickle.load(f, encoding="latin1")
    test_index = [int(line) for line in (raw / f"ind.{name}.test.index").read_text().split()]
    test_sorted = np.sort(test_index)

    tx, ty = objs["tx"], objs["ty"]
    if name == "citeseer":
        # Some test ids are isolated nodes missing from tx; pad them with zeros.
        full = range(test_sorted[0], test_sorted[-1] + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[test_sorted - test_sorted[0], :] = tx
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[test_sorted - test_sorted[0], :] = ty
        tx, ty = tx_ext, ty_ext

    features = sp.vstack((objs["allx"], tx)).tolil()
    features[test_index, :] = features[test_sorted, :]
    labels = np.vstack((objs["ally"], ty))
    labels[test_index, :] = labels[test_sorted, :]

    n = features.shape[0]
    edges = set()
    for u, nbrs in objs["graph"].items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    train = list(range(objs["y"].shape[0]))
    val = list(range(len(train), min(len(train) + 500, test_sorted[0])))
    return features.toarray(), labels.argmax(1), sorted(edges), train, val, test_sorted.tolist()


def write(out: Path, features, labels, edges, train, val, test) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "edges.txt").write_text("".join(f"{u} {v}\n" for u, v in edges))
    np.savetxt(out / "features.csv", features, delimiter=",", fmt="%.8g")
    (out / "labels.txt").write_text("".join(f"{y}\n" for y in labels))
    for fname, idx in [("train.txt", train), ("val.txt", val), ("test.txt", test)]:
        (out / fname).write_text("".join(f"{i}\n" for i in idx))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("name", choices=["cora", "citeseer", "pubmed"])
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--raw", type=Path, help="directory holding ind.<name>.* files")
    ap.add_argument("--normalize-features", action="store_true", help="scale each feature row to sum 1")
    args = ap.parse_args()

    raw = args.raw or args.out / "planetoid"
    if args.raw is None:
        fetch(args.name, raw)
    features, labels, edges, train, val, test = load(args.name, raw)
    if args.normalize_features:
        sums = features.sum(1, keepdims=True)
        features = np.divide(features, sums, out=np.zeros_like(features), where=sums != 0)
    write(args.out, features, labels, edges, train, val, test)
    print(f"{args.name}: {features.shape[0]} nodes, {len(edges)} edges, {features.shape[1]} features, "
          f"{labels.max() + 1} classes -> {args.out}")


if __name__ == "__main__":
    main()
