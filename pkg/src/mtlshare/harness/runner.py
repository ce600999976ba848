"""Run an experiment grid, aggregate over seeds and persist the results."""

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import ArgumentError, NumericalFailure
from .config import config_from_dict
from .experiments import CELLS

RESULTS_CSV = "results.csv"
SUMMARY_JSON = "summary.json"
FIXED_COLUMNS = ("grid", "seed", "status", "error")


def _fmt(v):
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def run_cell(cfg, value, seed):
    """Evaluate one cell; numerical failures are recorded, not raised."""
    record = {"grid": value, "seed": seed, "status": "ok", "error": ""}
    try:
        record.update(CELLS[cfg.kind](cfg, value, seed))
    except (NumericalFailure, np.linalg.LinAlgError) as exc:
        record.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    return record


def _run_packed(args):
    return run_cell(*args)


def aggregate(records, metrics):
    """Mean and standard error per grid value over successful finite entries."""
    out = []
    grid = []
    for rec in records:
        if rec["grid"] not in grid:
            grid.append(rec["grid"])
    for g in grid:
        rows = [r for r in records if r["grid"] == g]
        ok = [r for r in rows if r["status"] == "ok"]
        stats = {}
        for name in metrics:
            vals = np.array([r.get(name, math.nan) for r in ok], dtype=np.float64)
            vals = vals[np.isfinite(vals)]
            n = int(vals.size)
            mean = float(vals.mean()) if n else None
            se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else (0.0 if n else None)
            stats[name] = {"mean": mean, "se": se, "n": n}
        out.append({"grid": g, "cells": len(rows), "failed": len(rows) - len(ok), "metrics": stats})
    return out


@dataclass
class ExperimentResult:
    config: object
    records: list

    @property
    def metrics(self):
        names = []
        for rec in self.records:
            names.extend(k for k in rec if k not in FIXED_COLUMNS and k not in names)
        return sorted(names)

    @property
    def aggregates(self):
        return aggregate(self.records, self.metrics)

    def series(self, metric):
        """``(grid, mean, se)`` arrays for one metric (NaN where no data)."""
        aggs = self.aggregates
        x = np.array([a["grid"] for a in aggs], dtype=np.float64)
        mean = np.array([np.nan if a["metrics"][metric]["mean"] is None else a["metrics"][metric]["mean"]
                         for a in aggs])
        se = np.array([np.nan if a["metrics"][metric]["se"] is None else a["metrics"][metric]["se"]
                       for a in aggs])
        return x, mean, se

    def summary(self):
        return {"config": self.config.to_dict(), "metrics": self.metrics,
                "aggregates": self.aggregates}

    def save(self, out_dir):
        """Write results.csv and summary.json (and charts via :func:`render`)."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        columns = list(FIXED_COLUMNS) + self.metrics
        with open(out_dir / RESULTS_CSV, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for rec in self.records:
                writer.writerow([_fmt(rec.get(c, math.nan)) if c not in ("status", "error", "seed")
                                 else str(rec.get(c, "")) for c in columns])
        text = json.dumps(_jsonable(self.summary()), indent=1, sort_keys=True, allow_nan=False)
        (out_dir / SUMMARY_JSON).write_text(text + "\n", encoding="utf-8")
        return out_dir

    @classmethod
    def load(cls, out_dir):
        out_dir = Path(out_dir)
        try:
            summary = json.loads((out_dir / SUMMARY_JSON).read_text(encoding="utf-8"))
            with open(out_dir / RESULTS_CSV, newline="", encoding="utf-8") as fh:
                rows = list(csv.DictReader(fh))
        except FileNotFoundError as exc:
            raise ArgumentError(f"{out_dir} is not a result directory ({exc.filename} missing)") from exc
        cfg = config_from_dict(summary["config"])
        # restore each grid value with the exact type and value from the config
        by_value = {float(g): g for g in cfg.grid}
        records = []
        for row in rows:
            if float(row["grid"]) not in by_value:
                raise ArgumentError(f"grid value {row['grid']} is not in the stored config")
            rec = {"grid": by_value[float(row["grid"])], "seed": int(row["seed"]),
                   "status": row["status"], "error": row["error"]}
            rec.update({k: float(v) for k, v in row.items() if k not in FIXED_COLUMNS})
            records.append(rec)
        return cls(cfg, records)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def run(cfg):
    """Evaluate every (grid value, seed) cell; results are ordered grid-major."""
    cells = [(cfg, value, seed) for value in cfg.grid for seed in cfg.seeds]
    if cfg.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_run_packed, cells))
    else:
        records = [run_cell(*c) for c in cells]
    return ExperimentResult(cfg, records)
