"""Run artifacts: field CSVs, graymap rasters, summary and difference tables,
and the JSON manifest.

All numbers are written with ``%.17g`` so every double survives a round trip
exactly, and nothing depends on wall-clock time except the manifest's
``timestamp`` entry.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from pathlib import Path

import numpy as np

from .grid import FIELD_NAMES, State, integrate, sup_norm

FMT = "%.17g"

SUMMARY_COLUMNS = ("t",) + tuple(f"int_{f}" for f in FIELD_NAMES) + tuple(
    f"sup_{f}" for f in FIELD_NAMES
)


def _num(x: float) -> str:
    return FMT % x


def write_field_csv(path, values: np.ndarray, t: float) -> Path:
    """Header ``nx,ny,t``, one line with those values, then ``ny`` rows of
    ``nx`` values (row ``j`` is y-index ``j``)."""
    path = Path(path)
    values = np.asarray(values, dtype=float)
    ny, nx = values.shape
    with open(path, "w", newline="") as fh:
        fh.write("nx,ny,t\n")
        fh.write(f"{nx},{ny},{_num(t)}\n")
        np.savetxt(fh, values, fmt=FMT, delimiter=",")
    return path


def read_field_csv(path) -> tuple[np.ndarray, float]:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "nx,ny,t":
            raise ValueError(f"{path}: not a field CSV (header {header!r})")
        nx, ny, t = fh.readline().strip().split(",")
        values = np.loadtxt(fh, delimiter=",", ndmin=2)
    if values.shape != (int(ny), int(nx)):
        raise ValueError(f"{path}: expected {ny}x{nx} values, found {values.shape}")
    return values, float(t)


def write_pgm(path, values: np.ndarray) -> tuple[float, float]:
    """Binary 8-bit graymap, min-max scaled.  Returns the ``(lo, hi)`` scale.

    The top image row is the largest y so the picture has y pointing up.
    """
    values = np.asarray(values, dtype=float)
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi > lo:
        scaled = np.rint((values - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(values)
    pixels = np.flipud(scaled).astype(np.uint8)
    ny, nx = values.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
    return lo, hi


def read_pgm(path) -> np.ndarray:
    """Pixel array in grid orientation (row 0 = smallest y)."""
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary graymap")
    nx, ny, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit graymaps are supported")
    pixels = np.frombuffer(parts[4][: nx * ny], dtype=np.uint8).reshape(ny, nx)
    return np.flipud(pixels)


def write_scale(path, field: str, t: float, lo: float, hi: float) -> Path:
    """Sidecar text: value = lo + pixel / 255 * (hi - lo)."""
    path = Path(path)
    path.write_text(f"field {field}\nt {_num(t)}\nmin {_num(lo)}\nmax {_num(hi)}\n")
    return path


def read_scale(path) -> tuple[float, float]:
    entries = dict(line.split(maxsplit=1) for line in Path(path).read_text().splitlines() if line)
    return float(entries["min"]), float(entries["max"])


def snapshot_prefix(directory, t: float) -> Path:
    return Path(directory) / f"snap_t{t:010.4f}"


def write_snapshot(state: State, path_prefix, fields=FIELD_NAMES, raster: bool = True) -> list[Path]:
    """Write ``<prefix>_<field>.csv`` (plus ``.pgm`` and ``.scale.txt`` when
    ``raster``) for each requested field."""
    prefix = Path(path_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    written = []
    for name in fields:
        values = state.field(name).values
        base = f"{prefix.name}_{name}"
        written.append(write_field_csv(prefix.parent / f"{base}.csv", values, state.t))
        if raster:
            lo, hi = write_pgm(prefix.parent / f"{base}.pgm", values)
            written.append(prefix.parent / f"{base}.pgm")
            written.append(write_scale(prefix.parent / f"{base}.scale.txt", name, state.t, lo, hi))
    return written


def summary_row(state: State) -> dict[str, float]:
    row = {"t": state.t}
    for name in FIELD_NAMES:
        row[f"int_{name}"] = integrate(state.field(name))
    for name in FIELD_NAMES:
        row[f"sup_{name}"] = sup_norm(state.field(name))
    return row


def _write_rows(path, columns, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_num(row[c]) if isinstance(row[c], float) else row[c] for c in columns])
    return path


def write_summary(rows, path) -> Path:
    """One CSV row per snapshot.  ``rows`` may be states or summary dicts."""
    rows = [summary_row(r) if isinstance(r, State) else r for r in rows]
    ts = [r["t"] for r in rows]
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise ValueError("summary rows must have nondecreasing t")
    return _write_rows(path, SUMMARY_COLUMNS, rows)


def read_summary(path) -> list[dict[str, float]]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def write_diff_report(diffs, path) -> Path:
    """Per snapshot: sup-norm and integral of each field difference."""
    columns = ("t",) + tuple(f"sup_d{f}" for f in FIELD_NAMES) + tuple(
        f"int_d{f}" for f in FIELD_NAMES
    )
    rows = []
    for d in diffs:
        row = {"t": float(d.t)}
        row.update({f"sup_d{k}": float(v) for k, v in d.sup.items()})
        row.update({f"int_d{k}": float(v) for k, v in d.integral.items()})
        rows.append(row)
    return _write_rows(path, columns, rows)


def write_error_table(rows, path, metadata: dict | None = None) -> Path:
    """Lattice convergence table; ``metadata`` becomes leading ``#`` lines."""
    path = Path(path)
    columns = ("nodes", "h", "jump_rate", "dt", "l2_error", "ratio")
    with open(path, "w", newline="") as fh:
        for k, v in (metadata or {}).items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([r.nodes, _num(r.h), _num(r.jump_rate), _num(r.dt), _num(r.l2_error),
                        "" if r.ratio is None else _num(r.ratio)])
    return path


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def build_manifest(*, config_hash: str, seed: int, grid, dt_used: dict, version: str,
                   invariants: list[dict], breach: dict | None = None, extra: dict | None = None,
                   timestamp: str | None = None) -> dict:
    manifest = {
        "config_hash": config_hash,
        "rng_seed": seed,
        "grid": {"nx": grid.nx, "ny": grid.ny},
        "dt": dt_used,
        "code_version": version,
        "invariants": invariants,
        "status": "invalid" if breach is not None or not all(c["passed"] for c in invariants)
        else "valid",
        "breach": breach,
        "timestamp": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    if extra:
        manifest.update(extra)
    return _finite(manifest)


def write_manifest(manifest: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_finite(manifest), indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())
