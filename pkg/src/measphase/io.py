"""CSV/JSON artifacts.  Every CSV starts with a schema line and the config echo."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import SCHEMA_VERSION, echo
from .errors import DomainError
from .gafit import ExperimentRecord

EXPERIMENT_COLUMNS = ("w0_mm", "alpha_rad", "chi_rad", "contrast")


class DataFormatError(ValueError):
    """Malformed experimental input; the message names the offending line."""


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % float(value)


def header_lines(config: dict | None) -> list[str]:
    lines = [f"# schema={SCHEMA_VERSION}"]
    if config is not None:
        lines.append(f"# config={echo(config)}")
    return lines


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence], config: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for line in header_lines(config):
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Column names and a float array, skipping ``#`` comment lines."""
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#") and ln.strip()]
    reader = csv.reader(lines)
    columns = next(reader)
    values = np.array([[float(v) for v in row] for row in reader], dtype=float)
    return columns, values.reshape(-1, len(columns))


def write_json(path: str | Path, payload: dict, config: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"schema": SCHEMA_VERSION, **payload}
    if config is not None:
        body["config"] = config
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    return path


def read_experiment_csv(path: str | Path) -> list[ExperimentRecord]:
    """Parse ``w0_mm,alpha_rad,chi_rad,contrast[,weight]``; any bad line aborts the whole read."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"data file not found: {path}")
    records = []
    header = None
    with path.open(newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            fields = [f.strip() for f in text.split(",")]
            if header is None:
                if tuple(fields[:4]) != EXPERIMENT_COLUMNS or fields[4:] not in ([], ["weight"]):
                    raise DataFormatError(
                        f"{path}:{lineno}: expected header {','.join(EXPERIMENT_COLUMNS)}[,weight], got {text!r}"
                    )
                header = fields
                continue
            if len(fields) != len(header):
                raise DataFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
            try:
                values = [float(f) for f in fields]
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
            if not all(np.isfinite(values)):
                raise DataFormatError(f"{path}:{lineno}: non-finite value")
            if values[0] <= 0:
                raise DataFormatError(f"{path}:{lineno}: w0_mm must be positive")
            try:
                records.append(ExperimentRecord(*values))
            except DomainError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
    if header is None:
        raise DataFormatError(f"{path}: missing header line")
    if not records:
        raise DataFormatError(f"{path}: no data rows")
    return records


def write_experiment_csv(path: str | Path, records: Sequence[ExperimentRecord], config: dict | None = None) -> Path:
    return write_csv(
        path,
        EXPERIMENT_COLUMNS + ("weight",),
        ((r.w0, r.alpha, r.chi, r.contrast, r.weight) for r in records),
        config,
    )
