"""Audit oracle over a finished (or running) world."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

from .outcomes import COMPLETED, DEBIT_FAILED, LOST, REVERTED, TERMINAL
from .scenario import EXPECTED_CHECK
from .world import World

CHECK_NAMES = (
    "conservation",
    "liveness",
    "settlement-order",
    "revert-timing",
    "reconciliation",
    "transience",
    "bytes-bound",
    "byzantine-detection",
    "honest-acceptance",
)


@dataclass
class AuditReport:
    final_slot: int
    issuance: int
    outcome_counts: dict[str, int]
    failures: dict[str, list[tuple[int, str]]] = field(default_factory=dict)
    bytes_per_slot: dict[int, int] = field(default_factory=dict)
    losses: int = 0
    quiescent_at_end: bool = True
    negative_part_balance_seen: bool = False
    # records written vs. included txs alone, ignoring expiries
    literal_transience_violations: int = 0

    @property
    def passed(self) -> bool:
        return not any(self.failures.values())

    @property
    def first_failure_slot(self) -> int | None:
        slots = [s for fs in self.failures.values() for s, _ in fs]
        return min(slots) if slots else None

    def fail(self, check: str, slot: int, detail: str) -> None:
        self.failures.setdefault(check, []).append((slot, detail))

    def to_json(self) -> dict:
        return {
            "type": "summary",
            "passed": self.passed,
            "final_slot": self.final_slot,
            "first_failure_slot": self.first_failure_slot,
            "issuance": self.issuance,
            "outcomes": self.outcome_counts,
            "losses": self.losses,
            "quiescent_at_end": self.quiescent_at_end,
            "negative_part_balance_seen": self.negative_part_balance_seen,
            "literal_transience_violations": self.literal_transience_violations,
            "checks": {name: not self.failures.get(name) for name in CHECK_NAMES},
            "failures": {k: [[s, d] for s, d in v] for k, v in sorted(self.failures.items()) if v},
            "bytes_per_slot": {str(k): v for k, v in sorted(self.bytes_per_slot.items())},
        }


def _next_accepted(accepted: list[int], after: int) -> int | None:
    i = bisect.bisect_right(accepted, after)
    return accepted[i] if i < len(accepted) else None


def _rejections(rejected: list[int], lo: int, hi: int) -> int:
    return bisect.bisect_right(rejected, hi) - bisect.bisect_right(rejected, lo)


def audit(world: World) -> AuditReport:
    t_end = world.slot
    to = world.params.time_out
    rep = AuditReport(
        final_slot=t_end,
        issuance=world.issuance,
        outcome_counts=world.tracker.counts(),
        losses=len(world.losses),
        negative_part_balance_seen=world.negative_part_balance_seen,
    )

    for slot in world.conservation_failures:
        rep.fail("conservation", slot, "sum of all part-balances differs from issuance")
    for slot, msg in world.reconciliation_failures:
        rep.fail("reconciliation", slot, msg)

    for o in world.tracker.ordered():
        tid = o.tx_id.hex()[:12]
        if o.debit_slot is None:
            continue
        src, dst = o.sender.shard, o.recipient.shard
        slack = _rejections(world.rejected_slots[src], o.debit_slot, t_end)
        slack += _rejections(world.rejected_slots[dst], o.debit_slot, t_end)
        deadline = o.debit_slot + to + 2 + slack
        done = o.terminal_slot()
        if o.cls not in TERMINAL:
            if deadline <= t_end:
                rep.fail("liveness", deadline, f"{tid} still {o.cls} past slot {deadline}")
            continue
        if done is not None and done > deadline:
            rep.fail("liveness", done, f"{tid} reached {o.cls} at {done}, deadline {deadline}")
        if o.cls == COMPLETED and o.sender.pair != o.recipient.pair:
            window = to + _rejections(world.rejected_slots[dst], o.debit_slot, o.credit_slot)
            if not o.debit_slot < o.credit_slot < o.debit_slot + window:
                rep.fail("settlement-order", o.credit_slot, f"{tid} credited at {o.credit_slot}, debited at {o.debit_slot}")
        if o.cls in (REVERTED, LOST):
            want = _next_accepted(world.accepted_slots[src], o.failed_slot)
            if o.revert_slot != want:
                rep.fail("revert-timing", o.revert_slot, f"{tid} user revert at {o.revert_slot}, expected {want}")
        if o.cls == DEBIT_FAILED and o.credit_slot is not None:
            rep.fail("settlement-order", o.debit_slot, f"{tid} failed debit has a credit")

    rep.quiescent_at_end = not world.tracker.in_flight()

    for r in world.slot_records:
        rep.bytes_per_slot[r.slot] = rep.bytes_per_slot.get(r.slot, 0) + r.bytes_fetched
        if r.proposer == "honest":
            if not r.verdict.valid:
                rep.fail("honest-acceptance", r.slot, f"shard {r.shard}: honest block flagged {r.verdict.violations[:2]}")
            if r.records_written > r.txs + r.expired:
                rep.fail("transience", r.slot, f"shard {r.shard}: {r.records_written} records for {r.txs} txs")
            if r.decision == "accepted" and r.records_written > r.txs:
                rep.literal_transience_violations += 1
            if r.bytes_fetched > r.bytes_bound:
                rep.fail("bytes-bound", r.slot, f"shard {r.shard}: fetched {r.bytes_fetched} > {r.bytes_bound}")
        else:
            behavior = r.proposer.partition(":")[2]
            want = EXPECTED_CHECK[behavior]
            if r.decision != "rejected" or r.verdict.first_check != want:
                rep.fail(
                    "byzantine-detection", r.slot,
                    f"shard {r.shard} {behavior}: {r.decision}, first check {r.verdict.first_check}, expected {want}",
                )
    return rep

