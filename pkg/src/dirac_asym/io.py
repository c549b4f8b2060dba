"""Table files written by the command line tool, and their reader.

Both formats start with the comment line ``# schema=1``.  CSV floats are
written with 17 significant digits so that every double survives a round
trip; JSONL rows are JSON arrays (``Infinity``/``NaN`` allowed).
"""
from __future__ import annotations

import csv
import io as _io
import json

SCHEMA = 1
HEADER = f"# schema={SCHEMA}"


class SchemaError(ValueError):
    pass


def _fmt(v):
    if isinstance(v, bool):
        return "True" if v else "False"
    if isinstance(v, float):
        return format(v, ".17g")
    if v is None:
        return ""
    return str(v)


def _parse(s: str):
    if s in ("True", "False"):
        return s == "True"
    if s == "":
        return None
    try:
        return float(s)
    except ValueError:
        return s


def write_table(stream, columns, rows, fmt="csv", meta=None):
    """Write ``rows`` (sequences matching ``columns``) to an open text stream."""
    stream.write(HEADER + "\n")
    for k, v in (meta or {}).items():
        stream.write(f"# {k}={v}\n")
    if fmt == "csv":
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    elif fmt == "jsonl":
        stream.write(json.dumps(list(columns)) + "\n")
        for row in rows:
            stream.write(json.dumps([v if not hasattr(v, "item") else v.item() for v in row]) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    stream.flush()


def dumps_table(columns, rows, fmt="csv", meta=None) -> str:
    buf = _io.StringIO()
    write_table(buf, columns, rows, fmt, meta)
    return buf.getvalue()


def read_table(text: str):
    """Parse a table written by :func:`write_table`.

    Returns ``(columns, rows, meta)``; the format is detected from the
    first data line.
    """
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise SchemaError("missing '# schema=1' header")
    meta = {}
    k = 1
    while k < len(lines) and lines[k].startswith("#"):
        key, _, val = lines[k][1:].strip().partition("=")
        meta[key] = val
        k += 1
    body = lines[k:]
    if not body:
        raise SchemaError("no column line")
    if body[0].startswith("["):
        columns = json.loads(body[0])
        rows = [tuple(json.loads(ln)) for ln in body[1:] if ln.strip()]
    else:
        reader = csv.reader(body)
        columns = next(reader)
        rows = [tuple(_parse(v) for v in rec) for rec in reader]
    for r in rows:
        if len(r) != len(columns):
            raise SchemaError(f"row of length {len(r)} for {len(columns)} columns")
    return list(columns), rows, meta


def read_table_file(path):
    with open(path, encoding="utf-8") as fh:
        return read_table(fh.read())
