"""Atomic file writing and deterministic CSV helpers.

Every artifact is written through a temp file + rename so interrupted runs
never leave half-written files. Floats are serialized with ``repr`` (shortest
round-trip form), which makes outputs byte-identical for identical inputs.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path


def fmt(value) -> str:
    """Deterministic scalar formatting for CSV cells."""
    if hasattr(value, "item"):  # numpy scalar
        value = value.item()
    if isinstance(value, float):
        return repr(value)  # shortest round-trip form
    return str(value)


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` atomically (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows) -> None:
    """Write rows of scalars as CSV with a header line, atomically."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")
