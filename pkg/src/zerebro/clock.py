"""Deterministic millisecond clock for simulated runs.

Artifacts must be byte-identical across reruns, so anything that stamps
records (memory, ledger, event log) takes a clock callable instead of
reading wall time. SimClock ticks a fixed step per call.
"""

from __future__ import annotations

import threading

DEFAULT_EPOCH_MS = 1_700_000_000_000


class SimClock:
    """Monotonic fake clock: each call returns epoch + step * calls_so_far."""

    def __init__(self, epoch_ms: int = DEFAULT_EPOCH_MS, step_ms: int = 1000):
        self._now = epoch_ms
        self._step = step_ms
        self._lock = threading.Lock()

    def __call__(self) -> int:
        with self._lock:
            now = self._now
            self._now += self._step
            return now
