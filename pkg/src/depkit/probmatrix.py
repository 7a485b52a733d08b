"""Per-post class-probability matrices and their on-disk format.

The file format is the contract between training runs and fusion: UTF-8,
tab-separated, header ``pid\tp0\tp1\t...``, one row per post, probabilities
written with 17 significant digits so a write/read round trip is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyInput, MalformedRow, ShapeMismatch

ROW_SUM_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class ProbabilityMatrix:
    """Ordered post ids plus one probability row per post."""

    post_ids: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ShapeMismatch(f"rows must be 2-D, got shape {rows.shape}")
        if len(self.post_ids) != rows.shape[0]:
            raise ShapeMismatch(
                f"{len(self.post_ids)} ids vs {rows.shape[0]} probability rows"
            )
        if rows.shape[0] == 0:
            raise EmptyInput("probability matrix has no rows")
        if (rows < 0).any():
            raise ShapeMismatch("probabilities must be non-negative")
        sums = rows.sum(axis=1)
        if np.abs(sums - 1.0).max() > ROW_SUM_TOL:
            worst = int(np.abs(sums - 1.0).argmax())
            raise ShapeMismatch(
                f"row {worst} sums to {sums[worst]!r}, outside 1 +/- {ROW_SUM_TOL}"
            )
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "post_ids", tuple(self.post_ids))

    @property
    def num_classes(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]


def write_matrix(pm: ProbabilityMatrix, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = "pid\t" + "\t".join(f"p{i}" for i in range(pm.num_classes))
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        for pid, row in zip(pm.post_ids, pm.rows):
            fh.write(pid + "\t" + "\t".join(f"{v:.17g}" for v in row) + "\n")


def read_matrix(path: str | Path) -> ProbabilityMatrix:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\r\n").split("\t")
        if len(header) < 2 or header[0] != "pid" or header[1:] != [
            f"p{i}" for i in range(len(header) - 1)
        ]:
            raise MalformedRow(f"{path}: bad probability matrix header {header!r}")
        width = len(header) - 1
        ids: list[str] = []
        rows: list[list[float]] = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != width + 1:
                raise MalformedRow(
                    f"{path}:{lineno}: expected {width + 1} columns, got {len(cols)}"
                )
            ids.append(cols[0])
            try:
                rows.append([float(v) for v in cols[1:]])
            except ValueError as exc:
                raise MalformedRow(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise EmptyInput(f"{path}: no probability rows")
    return ProbabilityMatrix(post_ids=tuple(ids), rows=np.array(rows, dtype=np.float64))


def from_rows(post_ids: Sequence[str], rows: np.ndarray) -> ProbabilityMatrix:
    return ProbabilityMatrix(post_ids=tuple(post_ids), rows=rows)
