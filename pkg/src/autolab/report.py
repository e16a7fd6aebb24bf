"""Experiment reports: per-check records, JSON and CSV emission."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import mpmath

from .stats import RATIONAL_BITS

NUMERIC_FIELDS = ("value", "low", "high", "exact", "bound")
CSV_COLUMNS = ["name", "value", "value_decimal", "low", "high", "exact", "exact_decimal",
               "bound", "bound_decimal", "comparison", "verdict"]


def _normalize(v):
    """Keep ints, Fractions, floats, bools and strings; mpf and huge rationals become float."""
    if isinstance(v, Fraction) and v.denominator.bit_length() > RATIONAL_BITS:
        return float(v)
    if v is None or isinstance(v, (bool, int, Fraction, str)):
        return v
    if isinstance(v, mpmath.mpf):
        return float(v)
    if isinstance(v, float):
        return v
    return float(v)


@dataclass
class CheckRecord:
    name: str
    verdict: bool
    value: object = None
    low: object = None
    high: object = None
    exact: object = None
    bound: object = None
    comparison: str = ""

    def __post_init__(self):
        self.verdict = bool(self.verdict)
        for key in NUMERIC_FIELDS:
            setattr(self, key, _normalize(getattr(self, key)))


def encode_value(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


def decode_value(v):
    if isinstance(v, str):
        if v in ("inf", "-inf", "nan"):
            return float(v)
        num, sep, den = v.partition("/")
        if sep and num.lstrip("-").isdigit() and den.isdigit():
            return Fraction(int(num), int(den))
    return v


def decimal(v) -> str:
    """Locale-independent decimal rendering with 15 significant digits."""
    if v is None or isinstance(v, str):
        return "" if v is None else v
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, Fraction):
        return mpmath.nstr(mpmath.mpf(v.numerator) / v.denominator, 15)
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".15g")


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # name -> list of row dicts
    runtime: dict = field(default_factory=dict)  # kept apart; excluded from determinism checks

    @property
    def passed(self) -> bool:
        return all(c.verdict for c in self.checks)

    def add(self, *args, **kw) -> CheckRecord:
        rec = CheckRecord(*args, **kw)
        self.checks.append(rec)
        return rec

    def to_dict(self, runtime: bool = True) -> dict:
        out = {
            "kind": self.kind,
            "config": self.config,
            "passed": self.passed,
            "checks": [{k: encode_value(v) for k, v in asdict(c).items()} for c in self.checks],
            "tables": {name: [{k: encode_value(v) for k, v in row.items()} for row in rows]
                       for name, rows in self.tables.items()},
        }
        if runtime:
            out["runtime"] = self.runtime
        return out

    def to_json(self, runtime: bool = True) -> str:
        return json.dumps(self.to_dict(runtime), indent=2, sort_keys=True, allow_nan=False)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentReport":
        checks = [CheckRecord(**{k: decode_value(v) if k in NUMERIC_FIELDS else v
                                 for k, v in c.items()}) for c in data.get("checks", [])]
        tables = {name: [{k: decode_value(v) for k, v in row.items()} for row in rows]
                  for name, rows in data.get("tables", {}).items()}
        return cls(data["kind"], data.get("config", {}), checks, tables, data.get("runtime", {}))

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls.from_dict(json.loads(text))

    def checks_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in self.checks:
            w.writerow([c.name, encode_value(c.value), decimal(c.value), decimal(c.low),
                        decimal(c.high), encode_value(c.exact), decimal(c.exact),
                        encode_value(c.bound), decimal(c.bound), c.comparison,
                        "pass" if c.verdict else "fail"])
        return buf.getvalue()

    def table_csv(self, name: str) -> str:
        rows = self.tables[name]
        buf = io.StringIO()
        cols = list(rows[0]) if rows else []
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([encode_value(row[c]) if not isinstance(row[c], float) else decimal(row[c])
                        for c in cols])
        return buf.getvalue()


def emit_report(report: ExperimentReport, fmt: str = "json", out: Optional[str] = None) -> list:
    """Write the report; returns the paths written (stdout when ``out`` is None).

    JSON holds everything.  CSV writes the flattened check records to ``out``
    and each table to ``<stem>.<table>.csv`` next to it.
    """
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    if fmt == "json":
        text = report.to_json() + "\n"
        if out is None:
            print(text, end="")
            return []
        Path(out).write_text(text, encoding="utf-8")
        return [out]
    if out is None:
        print(report.checks_csv(), end="")
        return []
    path = Path(out)
    path.write_text(report.checks_csv(), encoding="utf-8")
    written = [str(path)]
    for name in report.tables:
        tpath = path.with_name(f"{path.stem}.{name}.csv")
        tpath.write_text(report.table_csv(name), encoding="utf-8")
        written.append(str(tpath))
    return written
