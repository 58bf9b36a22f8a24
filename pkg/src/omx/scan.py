"""Tabular sweep results with deterministic CSV/JSON serialization.

CSV layout: UTF-8, comma separated, '#'-prefixed metadata lines (sorted by
key) before a single header row; complex observables are split into _re/_im
columns. Floating point values are written with repr-faithful precision so
identical configs reproduce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))  # shortest exact round-trip


@dataclass
class ScanResult:
    """Axes (slowest first), observable columns, and provenance metadata.

    Rows run over the cartesian product of the axes in row-major order;
    every column must have exactly prod(len(axis)) entries.
    """

    axes: list[tuple[str, np.ndarray]]
    columns: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axes = [(name, np.asarray(vals)) for name, vals in self.axes]
        self.columns = {k: np.asarray(v) for k, v in self.columns.items()}
        n = self.n_rows
        for k, v in self.columns.items():
            if v.shape != (n,):
                raise ValueError(f"column {k!r} has shape {v.shape}, expected ({n},)")
            if np.issubdtype(v.dtype, np.floating) and np.isnan(v).any() \
                    and not self.metadata.get("allow_nan"):
                raise ValueError(f"column {k!r} contains NaN")

    @property
    def n_rows(self) -> int:
        n = 1
        for _, vals in self.axes:
            n *= len(vals)
        return n

    def axis_grid(self) -> list[np.ndarray]:
        """Axis value columns broadcast over the row product."""
        grids = np.meshgrid(*[vals for _, vals in self.axes], indexing="ij")
        return [g.reshape(-1) for g in grids]

    def _flat_columns(self) -> list[tuple[str, np.ndarray]]:
        out = [(name, col) for (name, _), col in zip(self.axes, self.axis_grid())]
        for name, col in self.columns.items():
            if np.iscomplexobj(col):
                out.append((f"{name}_re", col.real))
                out.append((f"{name}_im", col.imag))
            else:
                out.append((name, col))
        return out

    def write_csv(self, path) -> None:
        cols = self._flat_columns()
        lines = []
        for key in sorted(self.metadata):
            lines.append(f"# {key} = {json.dumps(self.metadata[key], sort_keys=True, default=str)}")
        lines.append(",".join(name for name, _ in cols))
        for i in range(self.n_rows):
            lines.append(",".join(_fmt(col[i]) for _, col in cols))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    def write_json(self, path) -> None:
        payload = {
            "metadata": {k: self.metadata[k] for k in sorted(self.metadata)},
            "axes": [{"name": name, "values": [float(v) for v in vals]}
                     for name, vals in self.axes],
            "columns": {},
        }
        for name, col in self.columns.items():
            if np.iscomplexobj(col):
                payload["columns"][name] = {
                    "re": [float(v) for v in col.real],
                    "im": [float(v) for v in col.imag]}
            else:
                payload["columns"][name] = [float(v) for v in col]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read_json(cls, path) -> "ScanResult":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        axes = [(ax["name"], np.asarray(ax["values"])) for ax in payload["axes"]]
        cols = {}
        for name, col in payload["columns"].items():
            if isinstance(col, dict):
                cols[name] = np.asarray(col["re"]) + 1j * np.asarray(col["im"])
            else:
                cols[name] = np.asarray(col)
        return cls(axes, cols, payload.get("metadata", {}))


@dataclass
class CompareReport:
    max_rel: float
    median_rel: float
    tolerance: float
    compared: list[str]

    @property
    def ok(self) -> bool:
        return self.max_rel <= self.tolerance


def compare(reference: ScanResult, other: ScanResult, tolerance: float,
            columns=None, floor: float = 1e-30) -> CompareReport:
    """Per-point relative deviation between matching columns of two results.

    Axes must match exactly (names and values); mismatch raises ValueError.
    Relative deviation uses the reference magnitude with a small floor.
    """
    if len(reference.axes) != len(other.axes):
        raise ValueError("axis count mismatch")
    for (na, va), (nb, vb) in zip(reference.axes, other.axes):
        if na != nb or va.shape != vb.shape or not np.allclose(va, vb, rtol=0, atol=0):
            raise ValueError(f"axis mismatch: {na!r} vs {nb!r}")
    names = columns or sorted(set(reference.columns) & set(other.columns))
    if not names:
        raise ValueError("no common columns to compare")
    rels = []
    for name in names:
        a, b = reference.columns[name], other.columns[name]
        rels.append(np.abs(a - b) / np.maximum(np.abs(a), floor))
    rel = np.concatenate(rels)
    return CompareReport(float(rel.max()), float(np.median(rel)), tolerance, list(names))
