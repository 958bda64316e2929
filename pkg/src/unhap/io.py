"""Event files, JSON artifacts and output manifests."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from pathlib import Path

import numpy as np

from .errors import DataError
from .events import EventSequence

log = logging.getLogger(__name__)

EVENT_COLUMNS = ("type_id", "time", "mark", "label")


def fmt_float(x) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def plain(obj):
    """JSON-ready copy: numpy scalars and arrays become Python values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def write_json(path, obj) -> None:
    text = json.dumps(plain(obj), sort_keys=True, indent=2, allow_nan=True)
    Path(path).write_text(text + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None


def _header_line(meta: dict) -> str:
    return "# " + " ".join(f"{k}={v}" for k, v in meta.items())


def write_events(path, seq: EventSequence, meta: dict | None = None) -> None:
    """Write ``seq`` as CSV. ``meta`` lands in a ``#`` comment line with ``T``."""
    meta = {**(meta or {}), "T": fmt_float(seq.T), "D": seq.D}
    rows = []
    for i in range(seq.D):
        labels = seq.labels[i] if seq.labels is not None else None
        for n, (t, k) in enumerate(zip(seq.times[i], seq.marks[i])):
            lab = "" if labels is None else str(int(labels[n]))
            rows.append((float(t), i, float(k), lab))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", newline="") as fh:
        fh.write(_header_line(meta) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENT_COLUMNS)
        for t, i, k, lab in rows:
            writer.writerow((i, fmt_float(t), fmt_float(k), lab))


def _parse_meta(line: str) -> dict:
    meta = {}
    for token in line.lstrip("#").split():
        if "=" in token:
            key, value = token.split("=", 1)
            meta[key] = value
    return meta


def _parse_row(row, lineno, path):
    where = f"{path}: row {lineno}"
    if len(row) not in (3, 4):
        raise DataError(f"{where}: expected 4 columns {EVENT_COLUMNS}, got {len(row)}")
    try:
        type_id = int(row[0])
        t = float(row[1])
        k = float(row[2])
    except ValueError:
        raise DataError(f"{where}: cannot parse {row!r}") from None
    if type_id < 0:
        raise DataError(f"{where}: negative type_id {type_id}")
    if not math.isfinite(t) or t < 0:
        raise DataError(f"{where}: time must be finite and >= 0, got {row[1]!r}")
    if not math.isfinite(k):
        raise DataError(f"{where}: mark must be finite, got {row[2]!r}")
    label = row[3].strip() if len(row) == 4 else ""
    if label not in ("", "0", "1"):
        raise DataError(f"{where}: label must be 0, 1 or empty, got {label!r}")
    return type_id, t, k, (int(label) if label else None)


def read_events(path, T: float | None = None, D: int | None = None):
    """Read an event CSV; returns ``(EventSequence, header metadata)``.

    Rows are sorted on load. ``T`` falls back to the header value. Labels are
    kept only if every row has one.
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except FileNotFoundError:
        raise DataError(f"{path}: file not found") from None
    meta = {}
    parsed = []
    saw_header = False
    for lineno, row in enumerate(csv.reader(lines), start=1):
        if not row or not "".join(row).strip():
            continue
        if row[0].startswith("#"):
            meta.update(_parse_meta(",".join(row)))
            continue
        if not saw_header and row[0].strip() == "type_id":
            saw_header = True
            continue
        parsed.append(_parse_row(row, lineno, path))
    if not parsed:
        raise DataError(f"{path}: no events")
    if T is None:
        if "T" not in meta:
            raise DataError(f"{path}: horizon T missing from header and config")
        T = float(meta["T"])
    D_file = max(p[0] for p in parsed) + 1
    D = max(D or 0, int(meta.get("D", 0)), D_file)
    late = [p for p in parsed if p[1] > T]
    if late:
        raise DataError(f"{path}: {len(late)} event(s) after T={T}")
    times = [[] for _ in range(D)]
    marks = [[] for _ in range(D)]
    labels = [[] for _ in range(D)]
    for type_id, t, k, lab in parsed:
        times[type_id].append(t)
        marks[type_id].append(k)
        labels[type_id].append(lab)
    has_labels = all(p[3] is not None for p in parsed)
    if not has_labels and any(p[3] is not None for p in parsed):
        log.warning("%s: some rows lack a label; ignoring the label column", path)
    seq = EventSequence.from_unsorted(times, marks, T, labels if has_labels else None)
    return seq, meta


def check_marks(seq: EventSequence, mark_model) -> None:
    """Reject marks outside the support of the mark model."""
    if mark_model.unmarked:
        return
    lo, hi = mark_model.support
    for i, k in enumerate(seq.marks):
        k = np.asarray(k)
        bad = (k < lo) | (k > hi)
        if np.any(bad):
            raise DataError(f"type {i}: {int(bad.sum())} mark(s) outside [{lo}, {hi}] "
                            f"(first: {k[bad][0]!r})")


def write_manifest(out_dir, names, meta: dict) -> Path:
    """List every artifact under ``out_dir`` with its sha256."""
    out_dir = Path(out_dir)
    files = {name: sha256_file(out_dir / name) for name in sorted(names)}
    path = out_dir / "manifest.json"
    write_json(path, {**meta, "artifacts": files})
    return path
