"""Thread-safe token bucket shared by every probe worker."""
from __future__ import annotations

import threading
import time
from typing import Callable

# Tolerance for the refill arithmetic: a wait shorter than the clock's resolution
# would otherwise never bring the bucket up to a whole token.
_EPSILON = 1e-9


class TokenBucket:
    """Blocking token bucket.

    The bucket starts empty, so the first ``n`` acquisitions take at least
    ``n / rate`` seconds; after an idle period at most ``burst`` tokens are available.
    """

    def __init__(
        self,
        rate: float,
        burst: int = 10,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if rate <= 0:
            raise ValueError("rate must be positive")
        if burst < 1:
            raise ValueError("burst must be at least 1")
        self.rate = float(rate)
        self.burst = burst
        self._clock = clock
        self._sleep = sleep
        self._tokens = 0.0
        self._last = clock()
        self._lock = threading.Lock()

    def _refill(self, now: float):
        self._tokens = min(self.burst, self._tokens + (now - self._last) * self.rate)
        self._last = now

    def acquire(self) -> None:
        while True:
            with self._lock:
                self._refill(self._clock())
                if self._tokens >= 1 - _EPSILON:
                    self._tokens = max(0.0, self._tokens - 1)
                    return
                wait = (1 - self._tokens) / self.rate
            self._sleep(wait)
