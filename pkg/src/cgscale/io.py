"""File formats: stream CSV, metrics tables and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError
from .streamgen import GENERATOR_NAME, MeasurementStream

STREAM_HEADER = ("iteration", "partition", "bytes_per_sec")
STREAM_META_KEYS = ("capacity", "delta", "seed", "generator", "clamp_count",
                    "partitions", "iterations", "init")


def fmt(value) -> str:
    """Render a table cell; floats get 9 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if v == 0:
            return "0"
        return format(v, ".9g")
    return str(value)


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_table(path: Path) -> list[dict]:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return list(csv.DictReader(lines))


# --------------------------------------------------------------------------
# stream files


def write_stream(path: Path, stream: MeasurementStream) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "capacity": repr(float(stream.capacity)),
        "delta": repr(float(stream.delta)),
        "seed": "" if stream.seed is None else str(stream.seed),
        "generator": stream.generator,
        "clamp_count": str(stream.clamp_count),
        "partitions": str(stream.n_partitions),
        "iterations": str(stream.n_iterations),
        "init": stream.init_mode,
    }
    with path.open("w", newline="", encoding="utf-8") as fh:
        for key in STREAM_META_KEYS:
            fh.write(f"# {key}={meta[key]}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STREAM_HEADER)
        for k in range(stream.n_iterations):
            row = stream.speeds[k]
            for j in range(stream.n_partitions):
                w.writerow((k + 1, j, repr(float(row[j]))))
    return path


def _parse_meta(lines: list[str]) -> dict:
    meta = {}
    for ln in lines:
        body = ln[1:].strip()
        if "=" in body:
            key, _, value = body.partition("=")
            meta[key.strip()] = value.strip()
    return meta


def read_stream(path: Path) -> MeasurementStream:
    """Parse a stream CSV; rows must form a complete, sorted iteration x partition grid."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read stream {path}: {exc}") from exc
    lines = text.splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    meta = _parse_meta(comments)
    if not body or tuple(c.strip() for c in body[0].split(",")) != STREAM_HEADER:
        raise InputError(f"{path}: expected header {','.join(STREAM_HEADER)}")
    rows = []
    for lineno, rec in enumerate(csv.reader(body[1:]), start=2):
        if len(rec) != 3:
            raise InputError(f"{path}: row {lineno} has {len(rec)} fields")
        try:
            k, j, v = int(rec[0]), int(rec[1]), float(rec[2])
        except ValueError as exc:
            raise InputError(f"{path}: row {lineno}: {exc}") from exc
        if not math.isfinite(v) or v < 0:
            raise InputError(f"{path}: row {lineno}: speed must be finite and non-negative")
        rows.append((k, j, v))
    if not rows:
        raise InputError(f"{path}: no data rows")
    n_iter = max(r[0] for r in rows)
    n_part = max(r[1] for r in rows) + 1
    if len(rows) != n_iter * n_part:
        raise InputError(f"{path}: expected {n_iter * n_part} rows, found {len(rows)}")
    speeds = np.empty((n_iter, n_part))
    for idx, (k, j, v) in enumerate(rows):
        if (k, j) != (idx // n_part + 1, idx % n_part):
            raise InputError(f"{path}: rows must be sorted by (iteration, partition)")
        speeds[k - 1, j] = v
    try:
        capacity = float(meta.get("capacity", "1.0"))
        delta = float(meta.get("delta", "0"))
        seed = int(meta["seed"]) if meta.get("seed") else None
        clamps = int(meta.get("clamp_count", "0"))
    except ValueError as exc:
        raise InputError(f"{path}: bad header value: {exc}") from exc
    if not capacity > 0:
        raise InputError(f"{path}: capacity must be positive")
    return MeasurementStream(
        speeds,
        capacity=capacity,
        delta=delta,
        seed=seed,
        init_mode=meta.get("init", "uniform"),
        clamp_count=clamps,
        generator=meta.get("generator", GENERATOR_NAME),
        meta=meta,
    )


# --------------------------------------------------------------------------
# manifests


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path: Path, command: str, config: dict, seed, version: str,
                   inputs: Sequence[Path] = (), outputs: Sequence[Path] = ()) -> Path:
    """JSON record of a run: no timestamps, so reruns produce identical bytes."""
    path = Path(path)
    doc = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": version,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {Path(p).name: sha256_file(p) for p in sorted(outputs, key=lambda p: Path(p).name)},
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
