# caseforge/core/clock.py
"""
Injectable clocks.

Every timestamp written by the simulator or the ledger comes from a Clock, so
tests can pin time and compare outputs byte for byte.
"""

import time
from typing import Callable

Clock = Callable[[], int]


def system_clock() -> int:
    """Current unix time in whole seconds."""
    return int(time.time())


class FixedClock:
    """Clock that starts at `start` and advances by `step` on every reading."""

    def __init__(self, start: int = 1_400_000_000, step: int = 0):
        self.now = start
        self.step = step

    def __call__(self) -> int:
        value = self.now
        self.now += self.step
        return value
