"""Bundle file access: delimited reads, column validation, input hashing."""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np


def read_table(path) -> dict:
    """CSV as {column: list of strings}."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        cols = {h: [] for h in header}
        for row in r:
            for h, v in zip(header, row):
                cols[h].append(v)
    return cols


def fcol(cols, name) -> np.ndarray:
    return np.asarray(cols[name], dtype=float)


def scol(cols, name) -> np.ndarray:
    return np.asarray(cols[name])


def check_inputs(bundle, requires: dict):
    """Validate, read and hash the files a recipe consumes.

    requires maps a bundle-relative path to its required columns. Returns
    (data, digest): data maps each path to its column dict, digest is the
    sha256 over the raw bytes of every input in sorted path order (path
    names are mixed into the hash so renaming is not invisible).
    """
    bundle = Path(bundle)
    problems = []
    data = {}
    h = hashlib.sha256()
    for rel in sorted(requires):
        path = bundle / rel
        if not path.is_file():
            problems.append(f"missing file {rel}")
            continue
        h.update(rel.encode())
        h.update(b"\0")
        h.update(path.read_bytes())
        cols = read_table(path)
        lack = [c for c in requires[rel] if c not in cols]
        if lack:
            problems.append(f"{rel} lacks columns {lack}")
        data[rel] = cols
    if problems:
        raise ValueError("bundle is not renderable: " + "; ".join(problems))
    return data, h.hexdigest()
