"""Column store for estimator observations.

One row per contract and period. Forward fields (suffix ``_f`` for t+h and
``_ff`` for t+2h) are NaN when the contract has no later counterpart.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from . import serialize

COLUMNS = [
    "id", "t", "h", "revis",
    "price", "c_norm", "y", "g", "retain", "steal",
    "vremot", "dremot", "iremot", "tport", "tfrac", "dport", "sigma_prev",
    "price_f", "c_norm_f", "y_f", "g_f", "tport_f", "dport_f", "dport_ff",
    "z_c1", "z_c3", "z_c4", "z_c5", "z_c1_lag", "z_c3_lag", "z_c4_lag", "z_sigma_lag2",
]
INTEGER_COLUMNS = {"id", "t", "revis"}
FORWARD_COLUMNS = ["price_f", "c_norm_f", "y_f", "g_f", "dport_f", "dport_ff"]
UNIT_INTERVAL = ["y", "y_f", "retain", "steal", "vremot", "dremot", "iremot", "tfrac",
                 "sigma_prev"]


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    columns: Mapping[str, np.ndarray]

    def __post_init__(self):
        missing = [c for c in COLUMNS if c not in self.columns]
        if missing:
            raise DataError(f"missing columns: {missing}")
        n = {len(np.asarray(v)) for v in self.columns.values()}
        if len(n) != 1:
            raise DataError("columns differ in length")
        cols = {c: np.asarray(self.columns[c], dtype=float) for c in COLUMNS}
        for c in COLUMNS:
            cols[c].setflags(write=False)
        object.__setattr__(self, "columns", cols)
        for c in UNIT_INTERVAL:
            v = cols[c]
            if np.any((v < 0) | (v > 1)):  # NaN compares false
                raise DataError(f"{c} outside [0, 1]")
        if np.any(cols["g"] <= 0):
            raise DataError("market growth must be positive")
        if np.any(cols["h"] < 1):
            raise DataError("horizon must be at least one period")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __len__(self) -> int:
        return len(self.columns["id"])

    @property
    def has_forward(self) -> np.ndarray:
        return np.all([np.isfinite(self.columns[c]) for c in FORWARD_COLUMNS], axis=0)

    def take(self, idx) -> "Dataset":
        return Dataset({c: v[idx] for c, v in self.columns.items()})

    def canonical(self) -> "Dataset":
        """Rows sorted by every column, so results do not depend on input order."""
        keys = [np.nan_to_num(self.columns[c], nan=np.inf) for c in reversed(COLUMNS)]
        return self.take(np.lexsort(keys))

    def subset(self, revis: int | None = None) -> "Dataset":
        if revis is None:
            return self
        return self.take(self.columns["revis"] == revis)

    def to_csv_text(self) -> str:
        def cell(c, v):
            if not np.isfinite(v):
                return None
            return int(v) if c in INTEGER_COLUMNS else float(v)

        rows = ([cell(c, self.columns[c][i]) for c in COLUMNS] for i in range(len(self)))
        return serialize.csv_text(COLUMNS, rows)

    def save(self, path: str | Path) -> None:
        serialize.write_text(path, self.to_csv_text())

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        header, rows = serialize.read_csv(path)
        if header != COLUMNS:
            raise DataError(f"{path}: expected columns {COLUMNS}, got {header}")
        out = np.empty((len(rows), len(COLUMNS)))
        for i, row in enumerate(rows):
            if len(row) != len(COLUMNS):
                raise DataError(f"{path}:{i + 2}: expected {len(COLUMNS)} fields, got {len(row)}")
            try:
                out[i] = [float(x) if x != "" else np.nan for x in row]
            except ValueError as exc:
                raise DataError(f"{path}:{i + 2}: {exc}") from exc
        try:
            return cls({c: out[:, j] for j, c in enumerate(COLUMNS)})
        except DataError as exc:
            raise DataError(f"{path}: {exc}") from exc
