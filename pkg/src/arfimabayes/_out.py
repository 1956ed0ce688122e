"""Output stream helper shared by the CSV writers."""

from __future__ import annotations

import contextlib
import sys


@contextlib.contextmanager
def open_output(path):
    """Text handle for ``path``; ``None`` or ``"-"`` means standard output."""
    if path is None or str(path) == "-":
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", newline="") as fh:
            yield fh
