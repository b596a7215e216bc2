"""
Bounded in-memory cache for ball stencils and cone quadratures.
"""
import threading
from collections import OrderedDict
from typing import Optional, Any, Hashable

from .config import config


class Cache:
    """Thread-safe LRU cache with a fixed number of entries."""

    def __init__(self, max_entries: int = 256):
        """
        Initialize cache.

        Args:
            max_entries: Number of entries kept before the least recently
                used one is evicted
        """
        self._cache: "OrderedDict[Hashable, Any]" = OrderedDict()
        self._max_entries = max_entries
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: Hashable) -> Optional[Any]:
        """
        Get value from cache if present.

        Args:
            key: Cache key

        Returns:
            Cached value or None if not found
        """
        with self._lock:
            if key not in self._cache:
                self.misses += 1
                return None
            self._cache.move_to_end(key)
            self.hits += 1
            return self._cache[key]

    def set(self, key: Hashable, value: Any) -> None:
        """
        Store a value, evicting the oldest entry when full.

        Args:
            key: Cache key
            value: Value to cache (treated as read-only by every reader)
        """
        with self._lock:
            self._cache[key] = value
            self._cache.move_to_end(key)
            while len(self._cache) > self._max_entries:
                self._cache.popitem(last=False)

    def get_or_build(self, key: Hashable, build) -> Any:
        """Return the cached value for `key`, building and storing it on a miss."""
        value = self.get(key)
        if value is None:
            value = build()
            self.set(key, value)
        return value

    def delete(self, key: Hashable) -> None:
        """
        Delete value from cache.

        Args:
            key: Cache key
        """
        with self._lock:
            self._cache.pop(key, None)

    def clear(self) -> None:
        """Clear all cache entries."""
        with self._lock:
            self._cache.clear()
            self.hits = 0
            self.misses = 0

    def size(self) -> int:
        """Get number of items in cache."""
        with self._lock:
            return len(self._cache)


# Global cache instance
stencil_cache = Cache(max_entries=config.STENCIL_CACHE_SIZE)
