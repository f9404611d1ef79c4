"""regkg: provenance-linked regulatory knowledge graph with triplet retrieval."""

__version__ = "0.1.0"

from importlib import resources as _resources
from pathlib import Path as _Path


def fixture_path(name: str = "mini_ecfr.jsonl") -> _Path:
    """Path to a bundled data file (the mini corpus or its alias table)."""
    return _Path(str(_resources.files("regkg").joinpath("data", name)))
