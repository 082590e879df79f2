"""Operation counters for cost assertions.

    with counting() as c:
        ...
    c["steady_solves"]
"""

from __future__ import annotations

import contextlib
import contextvars
from collections import Counter

_active: contextvars.ContextVar[tuple[Counter, ...]] = contextvars.ContextVar("steadygrad_counters", default=())


def count(event: str, n: int = 1) -> None:
    for c in _active.get():
        c[event] += n


@contextlib.contextmanager
def counting():
    c: Counter = Counter()
    token = _active.set(_active.get() + (c,))
    try:
        yield c
    finally:
        _active.reset(token)
