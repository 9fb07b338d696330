"""Clock abstraction: simulated deterministic time for replays, wall time for servers."""

from __future__ import annotations

import time
from datetime import datetime, timezone

# 2020-01-01T00:00:00Z; simulated sessions start here so transcripts are stable.
SIM_EPOCH = 1577836800


def to_iso(epoch_seconds: int) -> str:
    return datetime.fromtimestamp(epoch_seconds, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def from_iso(stamp: str) -> int:
    dt = datetime.strptime(stamp, "%Y-%m-%dT%H:%M:%SZ")
    return int(dt.replace(tzinfo=timezone.utc).timestamp())


class SimClock:
    """Ticks one second per advance; tick state is persisted by the store so a
    killed-and-resumed replay continues at the same simulated instant."""

    deterministic = True

    def __init__(self, tick: int = 0):
        self.tick = tick

    def now(self) -> int:
        return SIM_EPOCH + self.tick

    def advance(self) -> int:
        self.tick += 1
        return self.now()


class WallClock:
    deterministic = False

    def __init__(self):
        self.tick = 0

    def now(self) -> int:
        return int(time.time())

    def advance(self) -> int:
        self.tick += 1
        return self.now()
