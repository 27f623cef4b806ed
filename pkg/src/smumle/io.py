"""Plain-text file formats: dataset, mixing and fitted-value CSVs, key-value summaries."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .geometry import as_dataset
from .smu import MixingMeasure, TruthModel

__all__ = [
    "fmt",
    "write_dataset",
    "read_dataset",
    "write_mixing",
    "read_mixing",
    "write_fitted",
    "write_rows",
    "write_summary",
    "read_summary",
    "parse_truth",
]


def fmt(v) -> str:
    """Round-trippable text for a number; booleans as true/false, None blank."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else format(float(v), ".17g")
    if isinstance(v, (tuple, list, np.ndarray)):
        return " ".join(fmt(u) for u in v)
    return str(v)


def _read_table(path, expect_first: str) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != expect_first:
        raise ValueError(f"{path}: header must start with {expect_first!r}, got {header!r}")
    try:
        body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from None
    if body.size == 0:
        raise ValueError(f"{path}: no data rows")
    if body.ndim != 2 or body.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    return header, body


def write_rows(path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for r in rows:
            w.writerow([fmt(v) for v in r])


def write_dataset(path, data) -> None:
    x = as_dataset(data)
    write_rows(path, [f"x{j + 1}" for j in range(x.shape[1])], x)


def read_dataset(path) -> np.ndarray:
    header, body = _read_table(path, "x1")
    expected = [f"x{j + 1}" for j in range(len(header))]
    if header != expected:
        raise ValueError(f"{path}: dataset header must be {','.join(expected)}")
    return as_dataset(body)


def write_mixing(path, mixing: MixingMeasure) -> None:
    d = mixing.dim
    rows = np.column_stack([mixing.weights, mixing.atoms])
    write_rows(path, ["w"] + [f"y{j + 1}" for j in range(d)], rows)


def read_mixing(path) -> MixingMeasure:
    header, body = _read_table(path, "w")
    expected = ["w"] + [f"y{j + 1}" for j in range(len(header) - 1)]
    if header != expected or len(header) < 2:
        raise ValueError(f"{path}: mixing header must be w,y1..yd")
    if np.any(body[:, 0] < 0):
        raise ValueError(f"{path}: negative weight")
    total = body[:, 0].sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"{path}: weights sum to {total!r}, expected 1")
    return MixingMeasure(body[:, 1:], body[:, 0])


def write_fitted(path, data, fitted) -> None:
    x = as_dataset(data)
    header = [f"x{j + 1}" for j in range(x.shape[1])] + ["fitted"]
    write_rows(path, header, np.column_stack([x, np.asarray(fitted, dtype=float)]))


def write_summary(path, items: Mapping[str, object]) -> None:
    """One ``key: value`` line per item, in insertion order."""
    text = "".join(f"{k}: {fmt(v)}\n" for k, v in items.items())
    Path(path).write_text(text)


def read_summary(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            k, _, v = line.partition(":")
            out[k.strip()] = v.strip()
    return out


def parse_truth(spec: str, dim: int | None) -> TruthModel:
    """``exp`` (needs ``dim``) or ``file:PATH`` naming a mixing CSV."""
    if spec == "exp":
        if dim is None:
            raise ValueError("--truth exp needs --dim")
        return TruthModel.exp_product(dim)
    if spec.startswith("file:"):
        mixing = read_mixing(spec[5:])
        if dim is not None and dim != mixing.dim:
            raise ValueError(f"truth file has dimension {mixing.dim}, --dim says {dim}")
        return TruthModel.discrete(mixing)
    raise ValueError(f"unknown truth {spec!r}; use 'exp' or 'file:PATH'")
