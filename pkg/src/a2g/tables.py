"""Loaders for the embedded coefficient tables in ``a2g/data``.

The CSV files keep every number exactly as it is written in the source
tables, so ``float(cell)`` reproduces the published literal bit-for-bit.
Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import csv
from functools import lru_cache
from importlib import resources
from typing import Dict, List, Optional

TABLE_FILES = (
    "environments.csv",
    "scurve3.csv",
    "gpp_plos.csv",
    "log_distance.csv",
    "ab_pathloss.csv",
    "shadow_fading.csv",
)


@lru_cache(maxsize=None)
def _rows(name: str) -> tuple:
    text = resources.files("a2g.data").joinpath(name).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    return tuple(dict(row) for row in csv.DictReader(lines))


def load_table(name: str) -> List[Dict[str, str]]:
    """Return the rows of an embedded table as string dictionaries."""
    if name not in TABLE_FILES:
        raise KeyError(f"unknown table {name!r}")
    return [dict(r) for r in _rows(name)]


def opt_float(cell: str) -> Optional[float]:
    cell = cell.strip()
    return float(cell) if cell else None
