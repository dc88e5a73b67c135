"""Per-trial records and their CSV serialization.

Floats are written with 17 significant digits so parsing the CSV back
reproduces the in-memory values exactly. Rows are written in trial order
with a fixed column set; given a fixed seed the bytes are reproducible.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CSV_COLUMNS = ["method", "trial", "seed", "m", "distance", "f_final",
               "per_pixel_error", "iterations", "wall_ms"]


@dataclass
class TrialReport:
    method: str            # "surfing" | "surfing_projected" | "direct"
    trial: int
    seed: int
    m: int
    distance: float        # ||x_hat - x_star||; nan when no ground truth
    f_final: float
    per_pixel_error: float
    iterations: int
    wall_ms: float = 0.0
    x_star: np.ndarray | None = None
    x_hat: np.ndarray | None = None

    def success(self, threshold: float) -> bool:
        return math.isfinite(self.distance) and self.distance < threshold


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def write_trials_csv(path: str | Path, rows: list[TrialReport]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([
                r.method, r.trial, r.seed, r.m,
                _fmt(r.distance), _fmt(r.f_final), _fmt(r.per_pixel_error),
                r.iterations, _fmt(r.wall_ms),
            ])


def read_trials_csv(path: str | Path) -> list[TrialReport]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV columns {reader.fieldnames} in {path}")
        for rec in reader:
            rows.append(TrialReport(
                method=rec["method"],
                trial=int(rec["trial"]),
                seed=int(rec["seed"]),
                m=int(rec["m"]),
                distance=float(rec["distance"]),
                f_final=float(rec["f_final"]),
                per_pixel_error=float(rec["per_pixel_error"]),
                iterations=int(rec["iterations"]),
                wall_ms=float(rec["wall_ms"]),
            ))
    return rows


def per_pixel_error(g_out: np.ndarray, y: np.ndarray) -> float:
    diff = g_out - y
    return float(np.sqrt(diff @ diff / y.size))
