"""Plain-text output shared by every module: CSV tables with a fixed numeric format."""

from __future__ import annotations

import os
from collections.abc import Mapping, Sequence

import numpy as np

__all__ = ["TimeSeries", "format_value", "write_csv"]


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return "%.17g" % float(v)


def write_csv(path, columns: Mapping[str, Sequence]) -> None:
    """Write equally long columns as CSV (17 significant digits, ``\\n`` line ends)."""
    names = list(columns)
    data = [list(columns[c]) for c in names]
    lengths = {len(d) for d in data}
    if len(lengths) > 1:
        raise ValueError(f"columns have different lengths: {lengths}")
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*data):
            fh.write(",".join(format_value(v) for v in row) + "\n")


class TimeSeries:
    """Named, equally long columns indexed by drive cycle."""

    def __init__(self, **columns):
        self.columns = {k: np.asarray(v) for k, v in columns.items()}

    def __getitem__(self, key):
        return self.columns[key]

    def __len__(self):
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def to_csv(self, path: str | os.PathLike) -> None:
        write_csv(path, self.columns)
