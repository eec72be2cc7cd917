"""CSV and key-value export of trial records.

Floats are written with ``repr`` so a reload gives back the same doubles,
booleans as 0/1 and a missing diamond bound as an empty cell. Nothing
timing-dependent is written, so output bytes depend only on the inputs.
"""
from __future__ import annotations

import csv
import io
from dataclasses import fields
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..sources import History
from .experiment import EXPORTED_FIELDS, TrialRecord, record_as_dict

SCHEMA_FILE = "trial_schema.csv"
_TYPES = {f.name: f.type for f in fields(TrialRecord)}


def schema_columns() -> list[str]:
    """Column names listed in the shipped schema file."""
    text = resources.files(__package__).joinpath(SCHEMA_FILE).read_text(encoding="utf-8")
    return [row["column"] for row in csv.DictReader(io.StringIO(text))]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_csv(records: Sequence[TrialRecord]) -> str:
    if not records:
        raise ValueError("no trial records to export")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EXPORTED_FIELDS)
    for rec in records:
        row = record_as_dict(rec)
        writer.writerow([_cell(row[name]) for name in EXPORTED_FIELDS])
    return buf.getvalue()


def write_records(path: str | Path, records: Sequence[TrialRecord]) -> Path:
    path = Path(path)
    path.write_text(records_csv(records), encoding="utf-8")
    return path


def _parse(name: str, text: str):
    kind = _TYPES[name]
    if text == "":
        return None
    if kind == "bool":
        return text == "1"
    if kind == "int":
        return int(text)
    return float(text)


def read_records(path: str | Path) -> list[TrialRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [TrialRecord(**{k: _parse(k, v) for k, v in row.items()}) for row in reader]


def summary_text(summary: Mapping[str, object]) -> str:
    return "".join(f"{key} = {_cell(val)}\n" for key, val in summary.items())


def write_summary(path: str | Path, summary: Mapping[str, object]) -> Path:
    path = Path(path)
    path.write_text(summary_text(summary), encoding="utf-8")
    return path


def read_summary(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        key, sep, val = line.partition(" = ")
        if sep:
            out[key] = val
    return out


def write_rounds(path: str | Path, runs: Iterable[tuple[int, History]]) -> Path:
    """Per-round rows ``trial,t,Z,Y``; multi-index outcomes are joined with ``:``."""
    def fmt(x):
        if x is None:
            return ""
        if isinstance(x, tuple):
            return ":".join(map(str, x))
        return str(x)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", "t", "Z", "Y"])
    for trial, history in runs:
        for t, (y, z) in enumerate(zip(history.outcomes, history.inputs)):
            writer.writerow([trial, t, fmt(z), fmt(y)])
    path = Path(path)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def export(records: Sequence[TrialRecord], summary: Mapping[str, object], out_dir: str | Path) -> tuple[Path, Path]:
    """Write ``trials.csv`` and ``summary.txt`` into ``out_dir``."""
    if not records:
        raise ValueError("no trial records to export")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    return write_records(out / "trials.csv", records), write_summary(out / "summary.txt", summary)
