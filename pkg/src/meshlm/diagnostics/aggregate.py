"""Aggregation of per-sample metrics into reports, and CSV/JSON emission.

Schemas (shared with the figures component):
  effort.csv   block, mean, std
  cka.csv      stage_a, stage_b, mean
  spectrum.csv stage, index, mean, std
JSON mirrors carry identical field names. Floats are written with 17
significant digits so that read -> recompute round-trips bitwise.
"""

import csv
import json
import os
import re
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError
from .dumps import list_samples, list_stages, read_stage, stage_sort_key
from .metrics import DEFAULT_THETA, cka_rbf, effort, spectrum

METRICS = ("effort", "cka", "spectrum")

_FIELDS = {
    "effort": ("block", "mean", "std"),
    "cka": ("stage_a", "stage_b", "mean"),
    "spectrum": ("stage", "index", "mean", "std"),
}
_INT_FIELDS = {"index"}
_TEXT_FIELDS = {"block", "stage", "stage_a", "stage_b"}


@dataclass(frozen=True)
class ProbeReport:
    """All three metric slices, as row dicts in schema order."""
    effort: tuple
    cka: tuple
    spectrum: tuple


def _load_consistent(dump_dir):
    """All samples' stages, checked for matching stage sets and shapes."""
    samples = list_samples(dump_dir)
    stage_set = list_stages(dump_dir, samples[0])
    loaded = {}
    shapes = {}
    for sid in samples:
        if list_stages(dump_dir, sid) != stage_set:
            raise DataError(f"sample {sid} has a different stage set")
        arrays = {}
        for stage in stage_set:
            arr, _ = read_stage(dump_dir, sid, stage)
            if shapes.setdefault(stage, arr.shape) != arr.shape:
                raise DataError(
                    f"stage {stage!r} shape {arr.shape} in sample {sid} "
                    f"differs from {shapes[stage]}")
            arrays[stage] = arr
        loaded[sid] = arrays
    return samples, stage_set, loaded


def _state_stages(stage_set):
    return [s for s in stage_set if not s.endswith((".in", ".out"))]


def _block_labels(stage_set):
    stems = [s[:-3] for s in stage_set if s.endswith(".in")]
    for stem in stems:
        if f"{stem}.out" not in stage_set:
            raise DataError(f"block {stem!r} has .in but no .out capture")
    return sorted(stems, key=lambda s: stage_sort_key(f"{s}.in"))


def _mean_std(values):
    stacked = np.stack(values)
    return (np.mean(stacked, axis=0, dtype=np.float64),
            np.std(stacked, axis=0, dtype=np.float64, ddof=0))


def _effort_rows(samples, stage_set, loaded):
    blocks = _block_labels(stage_set)
    if not blocks:
        raise DataError("dump holds no block capture pairs")
    rows = []
    for block in blocks:
        vals = [effort(loaded[sid][f"{block}.in"], loaded[sid][f"{block}.out"])
                for sid in samples]
        mean, std = _mean_std(vals)
        rows.append({"block": block, "mean": float(mean), "std": float(std)})
    return rows


def _cka_rows(samples, stage_set, loaded, theta):
    stages = _state_stages(stage_set)
    n = len(stages)
    mats = []
    for sid in samples:
        mat = np.eye(n)
        for i in range(n):
            for j in range(i + 1, n):
                v = cka_rbf(loaded[sid][stages[i]], loaded[sid][stages[j]],
                            theta)
                mat[i, j] = mat[j, i] = v
        mats.append(mat)
    mean = np.mean(np.stack(mats), axis=0, dtype=np.float64)
    return [{"stage_a": stages[i], "stage_b": stages[j],
             "mean": float(mean[i, j])}
            for i in range(n) for j in range(n)]


def _spectrum_rows(samples, stage_set, loaded):
    rows = []
    for stage in _state_stages(stage_set):
        vals = [spectrum(loaded[sid][stage]) for sid in samples]
        mean, std = _mean_std(vals)
        rows.extend({"stage": stage, "index": i,
                     "mean": float(mean[i]), "std": float(std[i])}
                    for i in range(len(mean)))
    return rows


def aggregate(dump_dir, metric, theta=DEFAULT_THETA):
    """Mean/std rows for one metric over every sample in the dump."""
    if metric not in METRICS:
        raise ConfigError(f"metric must be one of {METRICS}, got {metric!r}")
    samples, stage_set, loaded = _load_consistent(dump_dir)
    if metric == "effort":
        return _effort_rows(samples, stage_set, loaded)
    if metric == "cka":
        return _cka_rows(samples, stage_set, loaded, theta)
    return _spectrum_rows(samples, stage_set, loaded)


def build_report(dump_dir, theta=DEFAULT_THETA):
    return ProbeReport(effort=tuple(aggregate(dump_dir, "effort")),
                       cka=tuple(aggregate(dump_dir, "cka", theta)),
                       spectrum=tuple(aggregate(dump_dir, "spectrum")))


# ------------------------------------------------------------- emission ----

def _format_value(field, value):
    if field in _TEXT_FIELDS:
        return value
    if field in _INT_FIELDS:
        return str(value)
    return format(value, ".17g")


def write_rows(out_dir, metric, rows):
    """Write <metric>.csv and the JSON mirror; returns both paths."""
    fields = _FIELDS[metric]
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{metric}.csv")
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_format_value(k, row[k]) for k in fields])
    json_path = os.path.join(out_dir, f"{metric}.json")
    with open(json_path, "w") as f:
        json.dump([{k: row[k] for k in fields} for row in rows], f, indent=1)
        f.write("\n")
    return csv_path, json_path


def read_rows(path):
    """Parse a metric CSV back into typed row dicts."""
    name = re.sub(r"\.csv$", "", os.path.basename(path))
    if name not in _FIELDS:
        raise DataError(f"unknown report file {path!r}")
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if tuple(header) != _FIELDS[name]:
            raise DataError(f"{path}: header {header} != {_FIELDS[name]}")
        rows = []
        for rec in reader:
            row = {}
            for field, text in zip(header, rec):
                if field in _TEXT_FIELDS:
                    row[field] = text
                elif field in _INT_FIELDS:
                    row[field] = int(text)
                else:
                    row[field] = float(text)
            rows.append(row)
    return rows
