"""On-disk state dumps: <dir>/<sample_id>/<stage>.bin + <stage>.json.

The .bin file holds the raw little-endian f32 bytes of one L x D stage (f32
regardless of compute dtype, to bound disk usage); the sidecar records the
stage name, shape, dtype, sample id, and model config hash. Metrics always
reload in f64.
"""

import json
import os
import re

import numpy as np

from ..errors import DataError

_STAGE_PATTERN = re.compile(
    r"^(h_emb|h_out|h\(\d+\)|(f_pre|f_core_\d+|f_coda)\.(in|out))$")


def _check_stage(stage):
    if not _STAGE_PATTERN.match(stage):
        raise DataError(f"unknown stage name {stage!r}")


def stage_sort_key(stage):
    """Canonical ordering: h_emb, h(0).., h_out, then block pairs in order."""
    m = re.match(r"^h\((\d+)\)$", stage)
    if stage == "h_emb":
        return (0, 0, 0)
    if m:
        return (0, 1, int(m.group(1)))
    if stage == "h_out":
        return (0, 2, 0)
    block, end = stage.rsplit(".", 1)
    m = re.match(r"^f_core_(\d+)$", block)
    pos = 0 if block == "f_pre" else (int(m.group(1)) if m else 10 ** 9)
    return (1, pos, 0 if end == "in" else 1)


def dump_stage(dump_dir, sample_id, stage, array, config_hash):
    """Write one stage's .bin + .json pair; returns the .bin path."""
    _check_stage(stage)
    arr = np.ascontiguousarray(np.asarray(array), dtype="<f4")
    sample_dir = os.path.join(dump_dir, sample_id)
    os.makedirs(sample_dir, exist_ok=True)
    bin_path = os.path.join(sample_dir, f"{stage}.bin")
    with open(bin_path, "wb") as f:
        f.write(arr.tobytes())
    sidecar = {"stage": stage, "shape": list(arr.shape), "dtype": "f32",
               "sample": sample_id, "config": config_hash}
    with open(os.path.join(sample_dir, f"{stage}.json"), "w") as f:
        json.dump(sidecar, f, indent=1)
        f.write("\n")
    return bin_path


def dump_trace(dump_dir, sample_id, trace, config_hash):
    """Dump every recorded stage and every block (in, out) pair."""
    written = []
    for stage, arr in trace.stages.items():
        dump_stage(dump_dir, sample_id, stage, arr, config_hash)
        written.append(stage)
    for label, x_in, x_out in trace.blocks:
        dump_stage(dump_dir, sample_id, f"{label}.in", x_in, config_hash)
        dump_stage(dump_dir, sample_id, f"{label}.out", x_out, config_hash)
        written.extend((f"{label}.in", f"{label}.out"))
    return written


def read_stage(dump_dir, sample_id, stage):
    """Load one stage as an f64 array plus its sidecar dict."""
    sample_dir = os.path.join(dump_dir, sample_id)
    with open(os.path.join(sample_dir, f"{stage}.json")) as f:
        sidecar = json.load(f)
    with open(os.path.join(sample_dir, f"{stage}.bin"), "rb") as f:
        raw = f.read()
    shape = tuple(sidecar["shape"])
    expected = 4 * int(np.prod(shape))
    if len(raw) != expected:
        raise DataError(f"{stage}.bin holds {len(raw)} bytes, "
                        f"sidecar shape {shape} needs {expected}")
    arr = np.frombuffer(raw, dtype="<f4").reshape(shape)
    return arr.astype(np.float64), sidecar


def list_samples(dump_dir):
    """Sorted sample ids (the subdirectories of the dump root)."""
    if not os.path.isdir(dump_dir):
        raise DataError(f"no dump directory at {dump_dir}")
    ids = sorted(e for e in os.listdir(dump_dir)
                 if os.path.isdir(os.path.join(dump_dir, e)))
    if not ids:
        raise DataError(f"dump directory {dump_dir} holds no samples")
    return ids


def list_stages(dump_dir, sample_id):
    """Stage names present for one sample, in canonical order."""
    sample_dir = os.path.join(dump_dir, sample_id)
    names = [e[:-5] for e in os.listdir(sample_dir) if e.endswith(".json")]
    for name in names:
        _check_stage(name)
    return sorted(names, key=stage_sort_key)
