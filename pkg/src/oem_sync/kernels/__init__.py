"""Integration backend selection.

Two interchangeable backends exist: ``numba`` (hot loops compiled with
@njit) and ``numpy`` (pure-numpy fallback).  Selection order:

1. the environment variable ``OEM_SYNC_BACKEND`` set to ``numba`` or
   ``numpy`` (or ``auto``),
2. otherwise ``numba`` when importable, ``numpy`` if not.

``oem-sync bench`` times both backends on the same workload.
"""
from __future__ import annotations

import contextlib
import os
import threading

from . import numpy_impl

ENV_VAR = "OEM_SYNC_BACKEND"
BACKENDS = ("numba", "numpy")


class BackendUnavailable(RuntimeError):
    pass


_lock = threading.Lock()
_modules: dict = {"numpy": numpy_impl}
_active_name: str | None = None
_warmed: set = set()


def load_backend(name: str):
    """Import and return a backend module by name."""
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choose from {BACKENDS}")
    with _lock:
        if name not in _modules:
            try:
                from . import numba_impl
            except ImportError as exc:
                raise BackendUnavailable(f"numba backend unavailable: {exc}") from exc
            _modules[name] = numba_impl
        return _modules[name]


def _select_initial() -> str:
    env = os.environ.get(ENV_VAR, "auto").strip().lower()
    if env in ("", "auto"):
        try:
            load_backend("numba")
            return "numba"
        except BackendUnavailable:
            return "numpy"
    if env not in BACKENDS:
        raise ValueError(f"{ENV_VAR} must be one of {BACKENDS + ('auto',)}, got {env!r}")
    load_backend(env)
    return env


def backend_name() -> str:
    global _active_name
    if _active_name is None:
        _active_name = _select_initial()
    return _active_name


def active():
    """The currently selected backend module."""
    return _modules[backend_name()]


@contextlib.contextmanager
def use_backend(name: str):
    """Temporarily switch the active backend (used by the benchmark)."""
    global _active_name
    load_backend(name)
    previous = backend_name()
    _active_name = name
    try:
        yield _modules[name]
    finally:
        _active_name = previous


def ensure_ready() -> None:
    """Warm up the active backend once (compiles the numba kernels).

    Must run before forking ensemble workers so children inherit compiled
    dispatchers instead of recompiling.
    """
    name = backend_name()
    with _lock:
        if name not in _warmed:
            _modules[name].warmup()
            _warmed.add(name)
