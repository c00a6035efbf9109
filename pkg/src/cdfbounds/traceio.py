"""Streaming trace output and tolerant read-back.

Two formats are written line by line and flushed after every iteration so a
reader (or a plot) can follow a running job:

* ``csv``: ``iteration,bound,state_index,cdf_value,wall_ms``, one row per
  state and bound.
* ``json``: JSON lines; a header object, one object per iteration and a
  closing summary.

Readers drop a partially written final line and, for CSV, an iteration
whose rows are incomplete, so whatever survives an interruption parses
(an empty prefix gives an empty trace).
"""

from __future__ import annotations

import csv
import io
import json
from typing import TextIO

import numpy as np

from .issa import BoundsTrace, Iteration

CSV_COLUMNS = ("iteration", "bound", "state_index", "cdf_value", "wall_ms")


class TraceFormatError(ValueError):
    pass


class TraceWriter:
    def __init__(self, stream: TextIO, fmt: str = "json"):
        if fmt not in ("json", "csv"):
            raise ValueError(f"unknown trace format {fmt!r}")
        self.stream = stream
        self.fmt = fmt
        self._csv = csv.writer(stream, lineterminator="\n") if fmt == "csv" else None

    def _emit_json(self, obj: dict) -> None:
        self.stream.write(json.dumps(obj) + "\n")
        self.stream.flush()

    def header(self, trace: BoundsTrace) -> None:
        if self.fmt == "csv":
            self._csv.writerow(CSV_COLUMNS)
            self.stream.flush()
        else:
            self._emit_json({"type": "header", **trace.header()})

    def iteration(self, it: Iteration) -> None:
        if self.fmt == "csv":
            for bound, cdf in (("lower", it.lower), ("upper", it.upper)):
                for k, v in enumerate(cdf):
                    self._csv.writerow((it.index, bound, k, repr(float(v)), f"{it.wall_ms:.3f}"))
            self.stream.flush()
        else:
            self._emit_json({"type": "iteration", **it.to_dict()})

    def summary(self, summary: dict) -> None:
        # CSV has no room for a summary; callers send it elsewhere
        if self.fmt == "json":
            self._emit_json({"type": "summary", **summary})


def _complete_lines(text: str) -> list[str]:
    lines = text.split("\n")
    # whatever follows the last newline was cut off mid-write
    return [ln for ln in lines[:-1] if ln.strip()]


def parse_json_trace(text: str) -> BoundsTrace:
    header = None
    iterations = []
    converged = False
    lines = _complete_lines(text)
    if not lines:
        return BoundsTrace("", {}, ())  # cut before the header landed
    for ln in lines:
        try:
            obj = json.loads(ln)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"bad trace line: {exc}") from None
        kind = obj.get("type")
        if kind == "header":
            header = obj
        elif kind == "iteration":
            iterations.append(Iteration.from_dict(obj))
        elif kind == "summary":
            converged = bool(obj.get("converged", False))
    if header is None:
        raise TraceFormatError("trace has no header line")
    return BoundsTrace(
        query=header["query"],
        evidence=dict(header.get("evidence", {})),
        states=tuple(header.get("states", ())),
        iterations=iterations,
        converged=converged,
    )


def parse_csv_trace(text: str, query: str = "", states=None) -> BoundsTrace:
    lines = _complete_lines(text)
    if not lines:
        return BoundsTrace(query, {}, tuple(states or ()))
    reader = csv.reader(io.StringIO("\n".join(lines)))
    head = next(reader)
    if tuple(head) != CSV_COLUMNS:
        raise TraceFormatError(f"unexpected CSV header {head}")
    rows: dict[int, dict[str, dict[int, float]]] = {}
    wall: dict[int, float] = {}
    for rec in reader:
        if len(rec) != len(CSV_COLUMNS):
            raise TraceFormatError(f"bad CSV row {rec}")
        it, bound, k, value, ms = rec
        if bound not in ("lower", "upper"):
            raise TraceFormatError(f"unknown bound {bound!r}")
        rows.setdefault(int(it), {"lower": {}, "upper": {}})[bound][int(k)] = float(value)
        wall[int(it)] = float(ms)
    if not rows:
        return BoundsTrace(query, {}, tuple(states or ()))
    m = len(states) if states is not None else 1 + max(
        k for r in rows.values() for b in r.values() for k in b
    )
    iterations = []
    for index in sorted(rows):
        r = rows[index]
        if any(sorted(r[b]) != list(range(m)) for b in ("lower", "upper")):
            break  # torn final iteration
        lower = np.array([r["lower"][k] for k in range(m)])
        upper = np.array([r["upper"][k] for k in range(m)])
        iterations.append(Iteration(index, lower, upper, {}, wall[index]))
    return BoundsTrace(query, {}, tuple(states or ()), iterations)


def parse_trace(text: str, fmt: str | None = None, **kw) -> BoundsTrace:
    if fmt is None:
        fmt = "csv" if text.startswith(CSV_COLUMNS[0]) else "json"
    return parse_csv_trace(text, **kw) if fmt == "csv" else parse_json_trace(text)
