"""Slot clock and crosslink registry."""

from __future__ import annotations

from bisect import bisect_right, insort
from dataclasses import dataclass


@dataclass(frozen=True)
class Crosslink:
    shard: int
    slot: int
    state_root: bytes
    event_root: bytes


@dataclass(frozen=True)
class Submission:
    accepted: bool
    reason: str | None = None


class Beacon:
    """Append-only registry of at most one crosslink per (shard, slot).

    Writes happen only between slot phases, so readers never see a partial
    record; returned links are immutable.
    """

    def __init__(self, slot: int = 0):
        self.current_slot = slot
        self._links: dict[tuple[int, int], Crosslink] = {}
        self._slots: dict[int, list[int]] = {}

    def advance(self, slot: int) -> None:
        if slot < self.current_slot:
            raise ValueError(f"beacon cannot move back from {self.current_slot} to {slot}")
        self.current_slot = slot

    def submit_crosslink(self, link: Crosslink) -> Submission:
        if link.slot > self.current_slot:
            return Submission(False, "future")
        existing = self._links.get((link.shard, link.slot))
        if existing is not None:
            if existing == link:
                return Submission(True)
            return Submission(False, "equivocation")
        if link.slot < self.current_slot:
            return Submission(False, "stale")
        self._links[(link.shard, link.slot)] = link
        insort(self._slots.setdefault(link.shard, []), link.slot)
        return Submission(True)

    def get_crosslink(self, shard: int, slot: int) -> Crosslink | None:
        return self._links.get((shard, slot))

    def slots(self, shard: int) -> list[int]:
        return list(self._slots.get(shard, ()))

    def latest_slot(self, shard: int, upto: int) -> int | None:
        """Most recent crosslinked slot of ``shard`` at or before ``upto``."""
        slots = self._slots.get(shard, [])
        i = bisect_right(slots, upto)
        return slots[i - 1] if i else None

    def slots_between(self, shard: int, lo: int, hi: int) -> list[int]:
        slots = self._slots.get(shard, [])
        return [s for s in slots[bisect_right(slots, lo - 1):bisect_right(slots, hi)]]

    def __len__(self) -> int:
        return len(self._links)
