"""Picks the kernel implementation at import time.

Set ``RNGWORKBENCH_BACKEND=python`` to force the numpy fallback, or
``=compiled`` to make a missing extension an error.
"""

from __future__ import annotations

import importlib
import logging
import os
from types import ModuleType

log = logging.getLogger(__name__)

_MODULES = {"compiled": "rngworkbench._kernels", "python": "rngworkbench._pure"}


def load(name: str) -> ModuleType:
    try:
        return importlib.import_module(_MODULES[name])
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(_MODULES)}") from None


def available() -> list[str]:
    names = []
    for name in _MODULES:
        try:
            load(name)
        except ImportError:
            continue
        names.append(name)
    return names


def _select() -> tuple[str, ModuleType]:
    wanted = os.environ.get("RNGWORKBENCH_BACKEND", "").strip().lower()
    if wanted == "python":
        return "python", load("python")
    try:
        return "compiled", load("compiled")
    except ImportError:
        if wanted == "compiled":
            raise
        log.info("compiled kernels unavailable; using the numpy fallback")
        return "python", load("python")


NAME, kernels = _select()
