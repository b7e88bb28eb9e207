"""CSV / JSON interchange formats.

Floats are written with 17 significant digits so that identical runs produce
byte-identical files.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from genen.simulate import CovarianceSpec, Dataset, TruthSpec


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    return str(value)


def write_table(path, header: Sequence[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(row.get(k)) for k in header])


def read_table(path) -> List[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, non-finite floats as null, round-trip
    float repr (Python's shortest repr is exact to 17 significant digits)."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


# dataset export

def write_dataset(path, dataset: Dataset, spec: Optional[CovarianceSpec] = None,
                  truth: Optional[TruthSpec] = None) -> Path:
    """Write ``x1..xp, y, beta`` columns plus a JSON sidecar ``<path>.json``.

    The ``beta`` column holds the ``p`` truth coefficients; when ``n != p`` the
    shorter block is padded with empty cells.
    """
    path = Path(path)
    n, p = dataset.X.shape
    header = [f"x{j + 1}" for j in range(p)] + ["y", "beta"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(max(n, p)):
            xs = [fmt(v) for v in dataset.X[i]] if i < n else [""] * p
            yv = fmt(dataset.y[i]) if i < n else ""
            bv = fmt(dataset.beta_star[i]) if i < p else ""
            w.writerow(xs + [yv, bv])
    sidecar = {
        "n": n,
        "p": p,
        "sigma": dataset.sigma,
        "seed": dataset.seed,
        "stream": list(dataset.stream),
        "spec": spec.to_dict() if spec else None,
        "truth": truth.to_dict() if truth else None,
    }
    write_json(path.with_suffix(path.suffix + ".json"), sidecar)
    return path


def read_dataset(path):
    """Read a dataset CSV; returns ``(X, y, beta_star or None)``.

    ``beta_star`` is ``None`` when the file has no ``beta`` column or it is empty.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        body = [row for row in reader]
    xcols = [i for i, h in enumerate(header) if h.startswith("x") and h[1:].isdigit()]
    if "y" not in header or not xcols:
        raise ValueError(f"{path}: expected columns x1..xp and y")
    yi = header.index("y")
    bi = header.index("beta") if "beta" in header else None
    X, y, beta = [], [], []
    for row in body:
        if row[yi] != "":
            X.append([float(row[i]) for i in xcols])
            y.append(float(row[yi]))
        if bi is not None and bi < len(row) and row[bi] != "":
            beta.append(float(row[bi]))
    X = np.array(X, dtype=np.float64)
    beta_star = np.array(beta) if beta else None
    if beta_star is not None and beta_star.size != X.shape[1]:
        raise ValueError(f"{path}: beta column has {beta_star.size} entries, expected {X.shape[1]}")
    return X, np.array(y, dtype=np.float64), beta_star


def write_matrix(path, m) -> None:
    """Headerless numeric CSV, one matrix row per line."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(m):
            w.writerow([fmt(v) for v in row])


def read_matrix(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    return np.array(rows, dtype=np.float64)
