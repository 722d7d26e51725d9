"""Atomic file writes: artifacts appear under their final name only complete."""

from __future__ import annotations

import os
from pathlib import Path


def atomic_write_text(path, text: str):
    """Write text to a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()
