"""Serialization of count records and analysis results.

Numbers are written as decimal text with at most 12 significant digits.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import fields, is_dataclass
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .counts import CountRecord

COUNT_COLUMNS = ("setting_id", "theta_deg", "singles_a", "singles_b", "coincidences", "integration_s", "seed")


def fmt_number(x: float) -> str:
    return format(float(x), ".12g")


def _num(x: float):
    x = float(x)
    if not math.isfinite(x):
        return str(x)
    v = float(fmt_number(x))
    return int(v) if v.is_integer() and abs(v) < 1e15 else v


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return fmt_number(v)
    return str(v)


def counts_to_csv(records: Iterable[CountRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COUNT_COLUMNS)
    for r in records:
        w.writerow([_cell(getattr(r, c)) for c in COUNT_COLUMNS])
    return buf.getvalue()


def counts_from_csv(text: str) -> list[CountRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != COUNT_COLUMNS:
        raise ValueError(f"counts.csv header {reader.fieldnames} does not match {list(COUNT_COLUMNS)}")

    def opt(v, conv):
        return None if v == "" else conv(v)

    return [
        CountRecord(
            setting_id=row["setting_id"],
            theta_deg=opt(row["theta_deg"], float),
            singles_a=int(row["singles_a"]),
            singles_b=opt(row["singles_b"], int),
            coincidences=opt(row["coincidences"], int),
            integration_s=float(row["integration_s"]),
            seed=int(row["seed"]),
        )
        for row in reader
    ]


def table_to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(float(v)) if isinstance(v, (float, np.floating)) else _cell(v) for v in row])
    return buf.getvalue()


def flatten(obj: Any, prefix: str = "") -> dict[str, Any]:
    """Flat dotted-key view of results, matrices and nested mappings.

    Complex matrices become ``<name>.re.<i>.<j>`` / ``<name>.im.<i>.<j>``.
    """
    out: dict[str, Any] = {}
    key = prefix.rstrip(".")
    if is_dataclass(obj) and not isinstance(obj, type):
        for f in fields(obj):
            if f.name == "loglik_history":
                continue
            out.update(flatten(getattr(obj, f.name), f"{prefix}{f.name}."))
    elif isinstance(obj, Mapping):
        for k, v in obj.items():
            out.update(flatten(v, f"{prefix}{k}."))
    elif isinstance(obj, np.ndarray) and obj.ndim == 2:
        for i in range(obj.shape[0]):
            for j in range(obj.shape[1]):
                out[f"{key}.re.{i}.{j}"] = _num(obj[i, j].real)
                out[f"{key}.im.{i}.{j}"] = _num(obj[i, j].imag)
    elif isinstance(obj, (tuple, list)) and obj and all(isinstance(x, tuple) and len(x) == 2 and isinstance(x[0], str) for x in obj):
        for k, v in obj:
            out.update(flatten(v, f"{prefix}{k}."))
    elif isinstance(obj, (tuple, list, np.ndarray)):
        for i, v in enumerate(obj):
            out.update(flatten(v, f"{prefix}{i}."))
    elif obj is None:
        out[key] = None
    elif isinstance(obj, (bool, np.bool_)):
        out[key] = bool(obj)
    elif isinstance(obj, (int, float, np.integer, np.floating)):
        out[key] = _num(obj)
    else:
        out[key] = str(obj)
    return out


def to_json(doc: Mapping[str, Any]) -> str:
    return json.dumps(flatten(doc), indent=1, sort_keys=True) + "\n"
