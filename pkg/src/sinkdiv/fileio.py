"""Atomic file writing shared by the library and the CLI."""
from __future__ import annotations

import os
import tempfile


def atomic_write_text(path, text: str):
    """Write text to path via a temp file and rename; never leaves partial files."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
