"""Deterministic JSON rendering for reports.

Floats are written with 17 significant digits so that identical inputs
produce byte-identical files and every value round-trips exactly.
"""

from __future__ import annotations

import json


def _render(obj) -> str:
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if obj != obj or obj in (float("inf"), float("-inf")):
            return "null"
        return format(obj, ".17g")
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: kv[0])
        body = ", ".join(f"{json.dumps(str(k))}: {_render(v)}" for k, v in items)
        return "{" + body + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in obj) + "]"
    # numpy scalars and anything float-like
    try:
        return _render(float(obj))
    except (TypeError, ValueError):
        raise TypeError(f"cannot serialize {type(obj).__name__} to report JSON")


def dumps_json(obj) -> str:
    return _render(obj) + "\n"
