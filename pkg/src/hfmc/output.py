"""Deterministic CSV and run-manifest writers.

Every CSV opens with a comment block carrying the canonical config hash,
the master seed, and the package version, then a header row and data rows.
Floats are rendered with a fixed %.12g so identical runs produce identical
bytes; nothing time- or host-dependent goes into a CSV.  Wall-clock timing
and redraw diagnostics go into the separate run manifest, which is
explicitly not byte-stable.
"""

from __future__ import annotations

import dataclasses
import hashlib
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "format_float",
    "canonical_config_text",
    "config_hash",
    "write_csv",
    "write_manifest",
]


def format_float(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _flatten(prefix: str, value) -> list:
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        out = []
        for f in dataclasses.fields(value):
            out.extend(_flatten(f"{prefix}{f.name}.", getattr(value, f.name)))
        return out
    if isinstance(value, (list, tuple)):
        return [(prefix.rstrip("."), ",".join(format_float(v) for v in value))]
    return [(prefix.rstrip("."), format_float(value))]


def canonical_config_text(config) -> str:
    """Flat key=value rendering of a (possibly nested) config dataclass.

    Keys are sorted, floats fixed-format, so two equal configs always
    produce the same text regardless of construction order.
    """
    pairs = _flatten("", config)
    lines = [f"{k}={v}" for k, v in sorted(pairs)]
    return "\n".join(lines) + "\n"


def config_hash(config) -> str:
    return hashlib.sha256(canonical_config_text(config).encode()).hexdigest()


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence],
              metadata: Sequence[tuple] = ()) -> None:
    """Write one CSV with a leading comment block of key/value metadata."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        for key, val in metadata:
            fh.write(f"# {key}: {val}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            assert len(row) == len(columns), (
                f"row width {len(row)} does not match {len(columns)} columns")
            fh.write(",".join(format_float(v) for v in row) + "\n")


def write_manifest(path, entries: Sequence[tuple]) -> None:
    """Write the run manifest (timings, diagnostics, file list)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        for key, val in entries:
            fh.write(f"{key}: {val}\n")
