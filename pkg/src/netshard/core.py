"""Domain types and netted part-state arithmetic.

A shard keeps a matrix of part-state cells indexed ``[shard][ee]``.  The real
balance of an EE on a shard is the sum of that cell over every shard's
matrix, so an EE-level transfer is a purely local edit on the source shard.
"""

from __future__ import annotations

import hashlib
import re
from bisect import bisect_left
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Iterable, Sequence

if TYPE_CHECKING:
    from .merkle import MerkleProof

AMOUNT_BITS = 128
MAX_AMOUNT = (1 << AMOUNT_BITS) - 1
MIN_SIGNED = -(1 << (AMOUNT_BITS - 1))
MAX_SIGNED = (1 << (AMOUNT_BITS - 1)) - 1

ADDRESS_LEN = 20
TXID_LEN = 32

_HEX40 = re.compile(r"^(0x)?[0-9a-fA-F]{40}$")
_HEX64 = re.compile(r"^(0x)?[0-9a-fA-F]{64}$")


class StructuralError(Exception):
    """Malformed input or broken internal invariant; never a protocol outcome."""


class AmountOverflow(StructuralError):
    pass


def checked_amount(value: int) -> int:
    if not 0 <= value <= MAX_AMOUNT:
        raise AmountOverflow(f"amount {value} outside u128")
    return value


def checked_signed(value: int) -> int:
    if not MIN_SIGNED <= value <= MAX_SIGNED:
        raise AmountOverflow(f"part-balance {value} outside i128")
    return value


def address(label: str) -> bytes:
    """Map a 40-hex string to its bytes, or any other label to a stable 20-byte id."""
    if _HEX40.match(label):
        return bytes.fromhex(label.removeprefix("0x"))
    return hashlib.sha256(b"user:" + label.encode()).digest()[:ADDRESS_LEN]


def tx_id(label: str) -> bytes:
    """Map a 64-hex string to its bytes, or any other label to a stable 32-byte id."""
    if _HEX64.match(label):
        return bytes.fromhex(label.removeprefix("0x"))
    return hashlib.sha256(b"tx:" + label.encode()).digest()


@dataclass(frozen=True, order=True)
class Endpoint:
    shard: int
    ee: int
    user: bytes

    def in_bounds(self, shards: int, ees: int) -> bool:
        return (
            0 <= self.shard < shards
            and 0 <= self.ee < ees
            and len(self.user) == ADDRESS_LEN
        )

    @property
    def pair(self) -> tuple[int, int]:
        return (self.shard, self.ee)


@dataclass(frozen=True)
class DebitTx:
    id: bytes
    sender: Endpoint
    recipient: Endpoint
    amount: int
    signature: bytes = b""

    @property
    def is_local(self) -> bool:
        """Same-shard same-EE transfer, settled in one step without an event."""
        return self.sender.pair == self.recipient.pair


@dataclass(frozen=True)
class ToCreditEvent:
    sender: Endpoint
    recipient: Endpoint
    amount: int
    block_number: int
    index: int
    tx_id: bytes

    def sort_key(self) -> tuple:
        return (self.tx_id, self.block_number, self.index)


@dataclass(frozen=True)
class CreditTx:
    event: ToCreditEvent
    proof: MerkleProof

    @property
    def id(self) -> bytes:
        return self.event.tx_id


@dataclass(frozen=True)
class RevertRecord:
    original_sender: Endpoint
    amount: int
    original_recipient: Endpoint
    tx_id: bytes

    def sort_key(self) -> tuple:
        return (self.tx_id, self.original_sender, self.original_recipient, self.amount)

    @classmethod
    def from_event(cls, event: ToCreditEvent) -> "RevertRecord":
        return cls(event.sender, event.amount, event.recipient, event.tx_id)


@dataclass(frozen=True)
class LossRecord:
    """A user-level refund that found no account to land in."""

    endpoint: Endpoint
    amount: int
    tx_id: bytes


def _insert_sorted(items: tuple, item, key) -> tuple:
    keys = [key(x) for x in items]
    k = key(item)
    pos = bisect_left(keys, k)
    if pos < len(keys) and keys[pos] == k:
        return items
    return items[:pos] + (item,) + items[pos:]


def ordered_events(events: Iterable[ToCreditEvent]) -> tuple[ToCreditEvent, ...]:
    return tuple(sorted(set(events), key=ToCreditEvent.sort_key))


def ordered_reverts(reverts: Iterable[RevertRecord]) -> tuple[RevertRecord, ...]:
    return tuple(sorted(set(reverts), key=RevertRecord.sort_key))


@dataclass(frozen=True)
class PartStateCell:
    balance: int = 0
    credits: tuple[ToCreditEvent, ...] = ()
    reverts: tuple[RevertRecord, ...] = ()

    def shifted(self, delta: int) -> "PartStateCell":
        return replace(self, balance=checked_signed(self.balance + delta))

    def with_credit(self, event: ToCreditEvent) -> "PartStateCell":
        return replace(self, credits=_insert_sorted(self.credits, event, ToCreditEvent.sort_key))

    def with_revert(self, record: RevertRecord) -> "PartStateCell":
        return replace(self, reverts=_insert_sorted(self.reverts, record, RevertRecord.sort_key))

    def cleared(self) -> "PartStateCell":
        if not self.credits and not self.reverts:
            return self
        return PartStateCell(self.balance)


Matrix = list[list[PartStateCell]]
OutstandingKey = tuple[int, int, int]  # (source shard, source EE, source block)
BalanceKey = tuple[int, bytes]  # (EE, user)


def zero_matrix(shards: int, ees: int) -> Matrix:
    return [[PartStateCell() for _ in range(ees)] for _ in range(shards)]


@dataclass
class ShardState:
    """Committed state of one shard after its most recent accepted block.

    ``seen_tx_ids`` maps debit ids to the block that included them and is
    pruned to the time-out window; it backs the duplicate-id check.
    """

    shard_id: int
    block_number: int
    part_state: Matrix
    outstanding_credits: dict[OutstandingKey, tuple[ToCreditEvent, ...]] = field(default_factory=dict)
    user_balance: dict[BalanceKey, int] = field(default_factory=dict)
    seen_tx_ids: dict[bytes, int] = field(default_factory=dict)

    @property
    def shards(self) -> int:
        return len(self.part_state)

    @property
    def ees(self) -> int:
        return len(self.part_state[0]) if self.part_state else 0

    def cell(self, shard: int, ee: int) -> PartStateCell:
        return self.part_state[shard][ee]

    def clone(self) -> "ShardState":
        # cells and event tuples are immutable, so one level of copying is enough
        return ShardState(
            self.shard_id,
            self.block_number,
            [list(row) for row in self.part_state],
            dict(self.outstanding_credits),
            dict(self.user_balance),
            dict(self.seen_tx_ids),
        )

    def matrix_total(self) -> int:
        return sum(c.balance for row in self.part_state for c in row)


def _check_dims(matrices: Sequence[Matrix]) -> tuple[int, int]:
    if not matrices:
        raise StructuralError("no part-state matrices given")
    shards = len(matrices[0])
    ees = len(matrices[0][0]) if shards else 0
    if len(matrices) != shards:
        raise StructuralError(f"expected {shards} matrices, got {len(matrices)}")
    for m in matrices:
        if len(m) != shards or any(len(row) != ees for row in m):
            raise StructuralError("part-state matrix dimension mismatch")
    return shards, ees


def real_balance(part_states: Sequence[Matrix], target: tuple[int, int]) -> int:
    """Sum one cell across every shard's matrix."""
    shards, ees = _check_dims(part_states)
    s, e = target
    if not (0 <= s < shards and 0 <= e < ees):
        raise StructuralError(f"target {target} outside {shards}x{ees}")
    return sum(m[s][e].balance for m in part_states)


def netted_transfer(
    part_state: Matrix, local_shard: int, src_ee: int, dest: tuple[int, int], amount: int
) -> Matrix:
    """Move ``amount`` of EE-level value from (local_shard, src_ee) to ``dest``.

    Both writes land in the local shard's matrix; part-balances may go negative.
    Returns a new matrix, leaving the input untouched.
    """
    if amount <= 0:
        raise StructuralError(f"netted transfer amount must be positive, got {amount}")
    ds, de = dest
    if (ds, de) == (local_shard, src_ee):
        raise StructuralError("netted transfer to the source cell itself")
    out = [list(row) for row in part_state]
    out[local_shard][src_ee] = out[local_shard][src_ee].shifted(-amount)
    out[ds][de] = out[ds][de].shifted(amount)
    return out


def matrix_total(part_states: Iterable[Matrix]) -> int:
    return sum(c.balance for m in part_states for row in m for c in row)
