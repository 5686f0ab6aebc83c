"""
In-memory evaluation cache for operator families.

Grid scans evaluate the same family at the same nodes many times (every
sampled subspace in a variational run re-scans the Rayleigh grid). This
module wraps cachetools' LRUCache so each family can keep its recent
T(lambda) and T'(lambda) values. Access is guarded by a lock because grid
probes may run on a thread pool.
"""

from __future__ import annotations

import threading
from collections.abc import Callable, Hashable

import numpy as np
from cachetools import LRUCache


class EvaluationCache:
    """
    Thread-safe LRU cache of matrix-valued evaluations.

    Stored arrays are copied on the way in and on the way out so callers
    can never mutate shared state. A ``max_entries`` of zero disables the
    cache entirely.
    """

    def __init__(self, *, max_entries: int) -> None:
        self._enabled = max_entries > 0
        self._cache: LRUCache[Hashable, np.ndarray] = LRUCache(maxsize=max(max_entries, 1))
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: Hashable) -> np.ndarray | None:
        """Return a copy of the cached array for ``key`` or None."""
        if not self._enabled:
            return None
        with self._lock:
            value = self._cache.get(key)
            if value is None:
                self.misses += 1
                return None
            self.hits += 1
        return value.copy()

    def set(self, key: Hashable, value: np.ndarray) -> None:
        if not self._enabled:
            return
        with self._lock:
            self._cache[key] = np.array(value, copy=True)

    def get_or_compute(self, key: Hashable, compute: Callable[[], np.ndarray]) -> np.ndarray:
        cached = self.get(key)
        if cached is not None:
            return cached
        value = compute()
        self.set(key, value)
        return np.array(value, copy=True)

    def clear(self) -> None:
        with self._lock:
            self._cache.clear()
            self.hits = 0
            self.misses = 0

    def __len__(self) -> int:
        with self._lock:
            return len(self._cache)


__all__ = ["EvaluationCache"]
