"""Bundled example scenarios (``example1`` .. ``example3``)."""

from __future__ import annotations

from pathlib import Path

HERE = Path(__file__).resolve().parent
NAMES = ("example1", "example2", "example3")


def bundled_path(name: str) -> Path:
    stem = name[:-4] if name.endswith(".xml") else name
    if stem not in NAMES:
        raise KeyError(f"no bundled scenario named {name!r}")
    return HERE / f"{stem}.xml"


def load_bundled(name: str):
    from ..ingest import read_scenario

    return read_scenario(bundled_path(name))
