"""JSON-friendly encoding helpers used by every artifact writer."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from typing import Any


def to_jsonable(obj: Any) -> Any:
    """Turn nested tuples, sets and dataclasses into plain JSON data.

    Tuples and lists become lists, sets become sorted lists, dataclasses become
    dicts of their fields. Anything else that JSON cannot hold falls back to
    ``repr`` so that digests stay total.
    """
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    if isinstance(obj, (tuple, list)):
        return [to_jsonable(x) for x in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted((to_jsonable(x) for x in obj), key=repr)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    return repr(obj)


def from_jsonable(obj: Any) -> Any:
    """Inverse of :func:`to_jsonable` for plain values: lists come back as tuples."""
    if isinstance(obj, list):
        return tuple(from_jsonable(x) for x in obj)
    return obj


def dumps(obj: Any) -> str:
    """Canonical single-line JSON (sorted keys, no spaces)."""
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"))


def digest(obj: Any) -> str:
    """Short stable content hash of ``obj``."""
    return hashlib.sha256(dumps(obj).encode()).hexdigest()[:16]


def write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps(rec))
            fh.write("\n")


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
