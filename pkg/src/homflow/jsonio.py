"""Deterministic JSON serialization and atomic file writes.

Floats are rendered with 17 significant digits, which round-trips IEEE
doubles exactly, so a written document re-read and re-written is
byte-identical and CSV rounding can never affect verdicts (the JSON is
the source of truth). Dicts keep insertion order; NaN/inf are rejected.
"""

import json
import math
import os
import tempfile


def dumps(obj, indent: int = 0) -> str:
    out = []
    _render(obj, out, indent, 0)
    out.append("\n")
    return "".join(out)


def _render(obj, out, indent, level):
    if obj is None or obj is True or obj is False:
        out.append("null" if obj is None else ("true" if obj else "false"))
    elif isinstance(obj, bool):  # pragma: no cover - caught above
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"non-finite float {obj!r} cannot be serialized")
        out.append(format(obj, ".17g"))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        _render_items(obj.items(), out, indent, level, braces="{}", with_keys=True)
    elif isinstance(obj, (list, tuple)):
        _render_items(obj, out, indent, level, braces="[]", with_keys=False)
    else:
        # numpy scalars and arrays land here
        if hasattr(obj, "item") and getattr(obj, "ndim", None) == 0:
            _render(obj.item(), out, indent, level)
        elif hasattr(obj, "tolist"):
            _render(obj.tolist(), out, indent, level)
        else:
            raise TypeError(f"cannot serialize {type(obj).__name__}")


def _render_items(items, out, indent, level, braces, with_keys):
    items = list(items)
    open_b, close_b = braces
    if not items:
        out.append(open_b + close_b)
        return
    nl = "\n" + " " * (indent * (level + 1)) if indent else ""
    sep = "," + (nl if indent else " ")
    out.append(open_b + nl)
    for idx, item in enumerate(items):
        if idx:
            out.append(sep)
        if with_keys:
            k, v = item
            if not isinstance(k, str):
                raise TypeError(f"JSON object keys must be strings, got {type(k).__name__}")
            out.append(json.dumps(k) + ": ")
            _render(v, out, indent, level + 1)
        else:
            _render(item, out, indent, level + 1)
    out.append(("\n" + " " * (indent * level) if indent else "") + close_b)


def write_atomic(path: str, text: str) -> None:
    """Write via a temp file in the same directory plus rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, obj, indent: int = 1) -> None:
    write_atomic(path, dumps(obj, indent=indent))


def load(path: str):
    with open(path) as f:
        return json.load(f)
