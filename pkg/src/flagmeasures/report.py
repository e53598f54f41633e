"""Structured run reports shared by the library and the command line.

A report is one JSON document with sorted keys: ``config`` (the full run
configuration), ``version``, ``results`` and ``timing``. Everything except
``timing`` is a deterministic function of the configuration.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, is_dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .stats import Estimate


def to_jsonable(obj):
    """Recursively convert estimates, arrays, fractions and dataclasses."""
    if isinstance(obj, Estimate):
        return obj.as_dict()
    if hasattr(obj, "as_dict") and callable(obj.as_dict):
        return to_jsonable(obj.as_dict())
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return repr(x)
        return x
    return obj


class Report:
    """Collects results and timing for one run."""

    def __init__(self, command: str, config: dict):
        self.command = command
        self.config = config
        self.results: dict = {}
        self._start = time.perf_counter()

    def add(self, key: str, value) -> None:
        self.results[key] = to_jsonable(value)

    def document(self) -> dict:
        return {
            "command": self.command,
            "config": to_jsonable(self.config),
            "version": __version__,
            "results": self.results,
            "timing": {"wall_seconds": time.perf_counter() - self._start},
        }

    def dumps(self) -> str:
        return json.dumps(self.document(), sort_keys=True, indent=2) + "\n"

    def write(self, path: str | Path | None) -> str:
        text = self.dumps()
        if path is None or str(path) == "-":
            return text
        Path(path).write_text(text)
        return text


def deterministic_part(doc: dict | str) -> dict:
    """The report without its timing section (what determinism checks compare)."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    return {k: v for k, v in doc.items() if k != "timing"}


__all__ = ["Report", "to_jsonable", "deterministic_part"]
