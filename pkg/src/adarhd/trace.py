"""Per-outer-iteration run records with CSV/JSON serialization."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

COLUMNS = ("t", "hypergrad_sq", "a", "K_t", "N_t", "upper_obj", "time_s", "hypergrad_error", "status")


@dataclass
class TraceRow:
    t: int
    hypergrad_sq: float
    a: float
    K_t: int
    N_t: int
    upper_obj: float
    time_s: float
    hypergrad_error: float = math.nan
    status: str = "ok"


@dataclass
class RunTrace:
    algorithm: str = ""
    config: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    status: str = "ok"
    warnings: list = field(default_factory=list)
    x: Any = None
    y: Any = None
    v: Any = None
    a0: Optional[float] = None

    def __len__(self):
        return len(self.rows)

    def append(self, row: TraceRow) -> None:
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        if name == "status":
            return np.array([r.status for r in self.rows])
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def ergodic(self) -> np.ndarray:
        return ergodic_min_gradnorm(self)

    def mark_diverged(self) -> None:
        self.status = "diverged"
        if self.rows:
            self.rows[-1].status = "diverged"

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(COLUMNS)
            for r in self.rows:
                writer.writerow([_fmt(getattr(r, c)) for c in COLUMNS])

    @classmethod
    def from_csv(cls, path, **kwargs) -> "RunTrace":
        trace = cls(**kwargs)
        with Path(path).open(newline="") as fh:
            for rec in csv.DictReader(fh):
                trace.rows.append(
                    TraceRow(
                        t=int(rec["t"]),
                        hypergrad_sq=float(rec["hypergrad_sq"]),
                        a=float(rec["a"]),
                        K_t=int(rec["K_t"]),
                        N_t=int(rec["N_t"]),
                        upper_obj=float(rec["upper_obj"]),
                        time_s=float(rec["time_s"]),
                        hypergrad_error=float(rec["hypergrad_error"]),
                        status=rec["status"],
                    )
                )
        if any(r.status == "diverged" for r in trace.rows):
            trace.status = "diverged"
        return trace

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "config": self.config,
            "status": self.status,
            "warnings": list(self.warnings),
            "a0": self.a0,
            "rows": [asdict(r) for r in self.rows],
        }

    def dump_json(self, path) -> None:
        Path(path).write_text(json.dumps(_jsonable(self.to_json()), indent=1))


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def ergodic_min_gradnorm(trace) -> np.ndarray:
    """Running minimum of the squared hypergradient norms (NaN entries skipped)."""
    values = trace.column("hypergrad_sq") if isinstance(trace, RunTrace) else np.asarray(trace, float)
    if values.size == 0:
        raise ValueError("empty trace")
    return np.fmin.accumulate(values)
