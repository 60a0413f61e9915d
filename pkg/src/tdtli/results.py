"""Scan result container shared by the engine, shot analysis and I/O."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ScanResult:
    """Ordered columns of a scan; the first column is the scanned parameter."""

    parameter: str
    columns: dict[str, np.ndarray]
    units: dict[str, str]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"ragged scan columns: {sorted(lengths)}")
        missing = set(self.columns) - set(self.units)
        if missing:
            raise ValueError(f"no units for columns {sorted(missing)}")
        if self.parameter not in self.columns:
            raise ValueError(f"parameter column {self.parameter!r} missing")

    def __len__(self) -> int:
        return len(self.columns[self.parameter])

    @property
    def x(self) -> np.ndarray:
        return self.columns[self.parameter]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]
