"""Persistence: atomic writes, grid CSV dumps with sidecars, run manifests."""
import csv
import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import ConfigError

FLOAT_FMT = "%.17g"
MANIFEST_VERSION = 1
FLAG_VALUES = ("plus", "minus", "free")

MANIFEST_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["manifest_version", "library_version", "command", "config", "wall_clock",
                 "residual_logs", "fitted_exponents", "certificates", "acceptance", "pass"],
    "additionalProperties": False,
    "properties": {
        "manifest_version": {"const": MANIFEST_VERSION},
        "library_version": {"type": "string"},
        "command": {"type": "string"},
        "config": {"type": "object"},
        "wall_clock": {"type": "object"},
        "residual_logs": {"type": "object"},
        "fitted_exponents": {"type": "object"},
        "certificates": {"type": "object"},
        "acceptance": {
            "type": "object",
            "propertyNames": {"pattern": "^(10|[1-9])(\\.[a-z_]+)?$"},
            "additionalProperties": {
                "type": "object",
                "required": ["pass"],
                "properties": {"pass": {"type": "boolean"}},
            },
        },
        "results": {"type": "object"},
        "artifacts": {"type": "array", "items": {"type": "string"}},
        "pass": {"type": "boolean"},
        "error": {"type": ["object", "null"]},
    },
}


@contextmanager
def atomic_open(path, mode="w", **kw):
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **kw) as fh:
            yield fh
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def to_jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats to plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def write_json(obj, path):
    try:
        with atomic_open(path, "w") as fh:
            json.dump(to_jsonable(obj), fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return Path(path)


def dump_grid(coords, values, path, flags=None, grid_spec=None):
    """Write ``x1,...,xN,value[,flag]`` rows at 17 significant digits plus a JSON sidecar.

    ``coords`` is ``(n, N)`` in row-major grid order.  The sidecar sits next
    to the CSV as ``<name>.json``.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    if coords.shape[0] == 1 and np.asarray(values).size > 1:
        coords = coords.T
    values = np.asarray(values, dtype=float).reshape(-1)
    if coords.shape[0] != values.size:
        raise ConfigError("coordinates and values differ in length")
    dim = coords.shape[1]
    header = [f"x{i + 1}" for i in range(dim)] + ["value"]
    if flags is not None:
        flags = list(flags)
        if len(flags) != values.size:
            raise ConfigError("flags and values differ in length")
        bad = set(flags) - set(FLAG_VALUES)
        if bad:
            raise ConfigError(f"unknown flags {sorted(bad)}")
        header.append("flag")
    path = Path(path)
    try:
        with atomic_open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(values.size):
                row = [FLOAT_FMT % c for c in coords[i]] + [FLOAT_FMT % values[i]]
                if flags is not None:
                    row.append(flags[i])
                w.writerow(row)
    except OSError as exc:
        raise OSError(f"cannot write grid {path}: {exc}") from exc
    side = {"dim": dim, "n_rows": int(values.size), "columns": header, "format": "%.17g"}
    side.update(grid_spec or {})
    write_json(side, sidecar_path(path))
    return path


def sidecar_path(path):
    path = Path(path)
    return path.with_suffix(".json") if path.suffix == ".csv" else path.with_name(path.name + ".json")


def load_grid(path):
    """Read a grid dump back: ``(coords, values, flags or None, sidecar)``."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        side = json.loads(sidecar_path(path).read_text()) if sidecar_path(path).exists() else {}
    except OSError as exc:
        raise OSError(f"cannot read grid {path}: {exc}") from exc
    header, body = rows[0], rows[1:]
    has_flag = header[-1] == "flag"
    dim = len(header) - 1 - int(has_flag)
    coords = np.array([[float(r[i]) for i in range(dim)] for r in body]).reshape(len(body), dim)
    values = np.array([float(r[dim]) for r in body])
    flags = [r[dim + 1] for r in body] if has_flag else None
    return coords, values, flags, side


def write_manifest(state, path):
    """Write a run manifest; validates it against :data:`MANIFEST_SCHEMA` first."""
    import jsonschema
    doc = to_jsonable(state)
    jsonschema.validate(doc, MANIFEST_SCHEMA)
    return write_json(doc, path)


def strip_wall_clock(doc):
    """Manifest without timing fields, for reproducibility comparisons."""
    doc = dict(doc)
    doc.pop("wall_clock", None)
    return doc


def diff_grids(path_a, path_b):
    """Sup difference of two grid dumps, evaluated at the nodes of the coarser one.

    The finer grid is interpolated linearly in 1-D; in higher dimension the
    comparison uses the nodes the two dumps share.
    """
    ca, va, _, _ = load_grid(path_a)
    cb, vb, _, _ = load_grid(path_b)
    if ca.shape[1] != cb.shape[1]:
        raise ConfigError("grids have different dimension")
    if ca.shape[0] > cb.shape[0]:
        ca, va, cb, vb = cb, vb, ca, va
    if ca.shape[1] == 1:
        order = np.argsort(cb[:, 0])
        lo, hi = cb[order[0], 0], cb[order[-1], 0]
        keep = (ca[:, 0] >= lo) & (ca[:, 0] <= hi)
        other = np.interp(ca[keep, 0], cb[order, 0], vb[order])
        diff = np.abs(va[keep] - other)
        pts = ca[keep]
    else:
        key = {tuple(np.round(c, 12)): v for c, v in zip(cb, vb)}
        pairs = [(c, v, key[tuple(np.round(c, 12))]) for c, v in zip(ca, va) if tuple(np.round(c, 12)) in key]
        if not pairs:
            raise ConfigError("the grids share no nodes")
        pts = np.array([p[0] for p in pairs])
        diff = np.abs(np.array([p[1] - p[2] for p in pairs]))
    i = int(np.argmax(diff))
    return {"sup_diff": float(diff[i]), "at": pts[i].tolist(), "n_compared": int(diff.size),
            "mean_diff": float(diff.mean())}
