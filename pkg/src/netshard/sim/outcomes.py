"""Per-transfer outcome classification from accepted blocks."""

from __future__ import annotations

from dataclasses import dataclass

from ..core import CreditTx, DebitTx, Endpoint
from ..proposer import Block

NOT_INCLUDED = "NOT-INCLUDED"
DEBIT_FAILED = "DEBIT-FAILED"
COMPLETED = "COMPLETED"
REVERTED = "REVERTED"
LOST = "LOST"
TERMINAL = (NOT_INCLUDED, DEBIT_FAILED, COMPLETED, REVERTED, LOST)

# transient states while a transfer is still moving
IN_FLIGHT = "IN-FLIGHT"  # debit done, credit pending
REVERTING = "REVERTING"  # credit failed or expired, user refund pending


@dataclass
class TransferOutcome:
    tx_id: bytes
    sender: Endpoint
    recipient: Endpoint
    amount: int
    submit_slot: int
    cls: str = NOT_INCLUDED
    debit_slot: int | None = None
    credit_slot: int | None = None
    failed_slot: int | None = None
    revert_slot: int | None = None
    reason: str | None = None

    @property
    def pending(self) -> bool:
        return self.cls in (IN_FLIGHT, REVERTING)

    def terminal_slot(self) -> int | None:
        if self.cls == COMPLETED:
            return self.credit_slot
        if self.cls in (REVERTED, LOST):
            return self.revert_slot
        if self.cls == DEBIT_FAILED:
            return self.debit_slot
        return None

    def to_json(self) -> dict:
        return {
            "type": "outcome",
            "tx": self.tx_id.hex(),
            "class": self.cls,
            "amount": self.amount,
            "debit_slot": self.debit_slot,
            "credit_slot": self.credit_slot,
            "failed_slot": self.failed_slot,
            "revert_slot": self.revert_slot,
            "reason": self.reason,
        }


class OutcomeTracker:
    def __init__(self):
        self.outcomes: dict[bytes, TransferOutcome] = {}

    def submit(self, tx: DebitTx, slot: int) -> None:
        self.outcomes[tx.id] = TransferOutcome(tx.id, tx.sender, tx.recipient, tx.amount, slot)

    def observe(self, block: Block) -> None:
        slot = block.slot
        for tx, rc in zip(block.txs, block.receipts):
            if isinstance(tx, DebitTx):
                o = self.outcomes.get(tx.id)
                if o is None or o.cls != NOT_INCLUDED:
                    continue
                o.debit_slot = slot
                if not rc.success:
                    o.cls, o.reason = DEBIT_FAILED, rc.reason
                elif tx.is_local:
                    o.cls, o.credit_slot = COMPLETED, slot
                else:
                    o.cls = IN_FLIGHT
            elif isinstance(tx, CreditTx):
                o = self.outcomes.get(tx.event.tx_id)
                if o is None:
                    continue
                if rc.success:
                    o.cls, o.credit_slot = COMPLETED, slot
                else:
                    o.cls, o.failed_slot, o.reason = REVERTING, slot, rc.reason
        for t in block.expired:
            o = self.outcomes.get(t)
            if o is not None:
                o.cls, o.failed_slot, o.reason = REVERTING, slot, "expired"
        for t in block.reverts_applied:
            o = self.outcomes.get(t)
            if o is not None:
                o.cls, o.revert_slot = REVERTED, slot
        for loss in block.losses:
            o = self.outcomes.get(loss.tx_id)
            if o is not None:
                o.cls, o.revert_slot = LOST, slot

    def in_flight(self) -> list[TransferOutcome]:
        return [o for o in self.outcomes.values() if o.pending]

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for o in self.outcomes.values():
            out[o.cls] = out.get(o.cls, 0) + 1
        return dict(sorted(out.items()))

    def ordered(self) -> list[TransferOutcome]:
        return sorted(self.outcomes.values(), key=lambda o: (o.submit_slot, o.tx_id))
