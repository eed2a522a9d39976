"""Curve containers and delimited-text serialization.

A :class:`CurveSeries` is the exchange format between simulators, fitters,
and the CLI: strictly increasing abscissa, values, optional 1-sigma
uncertainties, unit strings, and free-form metadata.  CSV files carry
``#``-prefixed metadata lines, a ``x,y,sigma`` header, and a unit row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class CurveSeries:
    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray | None = None
    x_unit: str = ""
    y_unit: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 1 or self.x.shape != self.y.shape:
            raise ValueError("x and y must be 1-D arrays of equal length")
        if len(self.x) >= 2 and np.any(np.diff(self.x) <= 0):
            raise ValueError("x must be strictly increasing")
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
            if self.sigma.shape != self.x.shape:
                raise ValueError("sigma must match x in length")
            if np.any(self.sigma <= 0):
                raise ValueError("sigma values must be positive")

    def __len__(self):
        return len(self.x)


def _format(v: float) -> str:
    return repr(float(v))


def write_csv(series: CurveSeries, path, header_meta: dict | None = None):
    """Write a curve with metadata lines, header row, and unit row."""
    lines = []
    meta = dict(header_meta or {})
    meta.update(series.meta)
    for key in meta:
        lines.append(f"# {key}: {meta[key]}")
    lines.append("x,y,sigma")
    lines.append(f"{series.x_unit},{series.y_unit},{series.y_unit}")
    for i in range(len(series)):
        s = _format(series.sigma[i]) if series.sigma is not None else ""
        lines.append(f"{_format(series.x[i])},{_format(series.y[i])},{s}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> CurveSeries:
    """Read a curve written by :func:`write_csv`."""
    meta = {}
    rows = []
    header = None
    units = None
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, val = body.split(":", 1)
                    meta[key.strip()] = val.strip()
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                if header[:2] != ["x", "y"]:
                    raise ValueError(f"unexpected header {header!r}, expected x,y[,sigma]")
                continue
            if units is None:
                units = [c.strip() for c in line.split(",")]
                continue
            rows.append([c.strip() for c in line.split(",")])
    if header is None or units is None:
        raise ValueError(f"{path}: missing header or unit row")
    x = np.array([float(r[0]) for r in rows])
    y = np.array([float(r[1]) for r in rows])
    sigma = None
    if len(header) > 2 and any(len(r) > 2 and r[2] for r in rows):
        sigma = np.array([float(r[2]) if len(r) > 2 and r[2] else np.nan for r in rows])
        if np.any(np.isnan(sigma)):
            raise ValueError(f"{path}: sigma column is partially filled")
    return CurveSeries(
        x=x, y=y, sigma=sigma,
        x_unit=units[0] if len(units) > 0 else "",
        y_unit=units[1] if len(units) > 1 else "",
        meta=meta,
    )


def write_table(path, columns: dict[str, np.ndarray], header_meta: dict | None = None):
    """Write a plain multi-column table with metadata lines (no unit row)."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    n = len(arrays[0])
    lines = [f"# {k}: {v}" for k, v in (header_meta or {}).items()]
    lines.append(",".join(names))
    for i in range(n):
        lines.append(",".join(_format(a[i]) for a in arrays))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
