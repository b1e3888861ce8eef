"""Canonical byte encoding.

Fields are written in declaration order, integers big-endian fixed width,
sets and maps length-prefixed (u32) with elements in canonical order.  These
bytes are the exact Merkle leaf input, so any change here changes every root.
"""

from __future__ import annotations

import struct

from .core import (
    ADDRESS_LEN,
    TXID_LEN,
    DebitTx,
    Endpoint,
    PartStateCell,
    RevertRecord,
    ShardState,
    StructuralError,
    ToCreditEvent,
    checked_amount,
    checked_signed,
    ordered_events,
    ordered_reverts,
)
from .merkle import MerkleProof

TAG_CELL = 0x01
TAG_OUTSTANDING = 0x02
TAG_USER = 0x03
TAG_SEEN = 0x04
TAG_HEADER = 0x05

ENDPOINT_SIZE = 4 + 4 + ADDRESS_LEN
EVENT_SIZE = 2 * ENDPOINT_SIZE + 16 + 8 + 4 + TXID_LEN
REVERT_SIZE = 2 * ENDPOINT_SIZE + 16 + TXID_LEN
CELL_FIXED_SIZE = 16 + 4 + 4
CELL_LEAF_FIXED_SIZE = 1 + 4 + 4 + CELL_FIXED_SIZE


def u32(n: int) -> bytes:
    return struct.pack(">I", n)


def u64(n: int) -> bytes:
    return struct.pack(">Q", n)


def u128(n: int) -> bytes:
    return checked_amount(n).to_bytes(16, "big")


def i128(n: int) -> bytes:
    return checked_signed(n).to_bytes(16, "big", signed=True)


def encode_endpoint(e: Endpoint) -> bytes:
    if len(e.user) != ADDRESS_LEN:
        raise StructuralError(f"user address must be {ADDRESS_LEN} bytes")
    return u32(e.shard) + u32(e.ee) + e.user


def encode_event(e: ToCreditEvent) -> bytes:
    return (
        encode_endpoint(e.sender)
        + encode_endpoint(e.recipient)
        + u128(e.amount)
        + u64(e.block_number)
        + u32(e.index)
        + _txid(e.tx_id)
    )


def encode_revert(r: RevertRecord) -> bytes:
    return (
        encode_endpoint(r.original_sender)
        + u128(r.amount)
        + encode_endpoint(r.original_recipient)
        + _txid(r.tx_id)
    )


def encode_cell(c: PartStateCell) -> bytes:
    parts = [i128(c.balance), u32(len(c.credits))]
    parts.extend(encode_event(e) for e in ordered_events(c.credits))
    parts.append(u32(len(c.reverts)))
    parts.extend(encode_revert(r) for r in ordered_reverts(c.reverts))
    return b"".join(parts)


def signing_payload(tx: DebitTx) -> bytes:
    return _txid(tx.id) + encode_endpoint(tx.sender) + encode_endpoint(tx.recipient) + u128(tx.amount)


def encode_debit(tx: DebitTx) -> bytes:
    return signing_payload(tx) + u32(len(tx.signature)) + tx.signature


def encode_proof(p: MerkleProof) -> bytes:
    return u64(p.leaf_index) + u32(len(p.siblings)) + b"".join(p.siblings) + u64(p.leaf_count)


def proof_size(p: MerkleProof) -> int:
    return 8 + 4 + 32 * len(p.siblings) + 8


def _txid(t: bytes) -> bytes:
    if len(t) != TXID_LEN:
        raise StructuralError(f"transaction id must be {TXID_LEN} bytes")
    return t


# -- shard state ------------------------------------------------------------


def cell_leaf(row: int, col: int, cell: PartStateCell) -> bytes:
    return bytes([TAG_CELL]) + u32(row) + u32(col) + encode_cell(cell)


def cell_leaf_index(row: int, col: int, ees: int) -> int:
    """Cells are the first leaves of a state, row-major."""
    return row * ees + col


def _outstanding_body(key, events) -> bytes:
    s, e, b = key
    evs = ordered_events(events)
    return u32(s) + u32(e) + u64(b) + u32(len(evs)) + b"".join(encode_event(x) for x in evs)


def state_leaves(state: ShardState) -> list[bytes]:
    leaves = [
        cell_leaf(r, c, cell)
        for r, row in enumerate(state.part_state)
        for c, cell in enumerate(row)
    ]
    for key in sorted(state.outstanding_credits):
        leaves.append(bytes([TAG_OUTSTANDING]) + _outstanding_body(key, state.outstanding_credits[key]))
    for (ee, user) in sorted(state.user_balance):
        leaves.append(bytes([TAG_USER]) + u32(ee) + user + u128(state.user_balance[(ee, user)]))
    for t in sorted(state.seen_tx_ids):
        leaves.append(bytes([TAG_SEEN]) + _txid(t) + u64(state.seen_tx_ids[t]))
    leaves.append(bytes([TAG_HEADER]) + u32(state.shard_id) + u64(state.block_number))
    return leaves


def encode_state(state: ShardState) -> bytes:
    out = [u32(state.shard_id), u64(state.block_number), u32(state.shards), u32(state.ees)]
    out.extend(encode_cell(c) for row in state.part_state for c in row)
    out.append(u32(len(state.outstanding_credits)))
    out.extend(_outstanding_body(k, state.outstanding_credits[k]) for k in sorted(state.outstanding_credits))
    out.append(u32(len(state.user_balance)))
    for (ee, user) in sorted(state.user_balance):
        out.append(u32(ee) + user + u128(state.user_balance[(ee, user)]))
    out.append(u32(len(state.seen_tx_ids)))
    for t in sorted(state.seen_tx_ids):
        out.append(_txid(t) + u64(state.seen_tx_ids[t]))
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise StructuralError("truncated encoding")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def u128(self) -> int:
        return int.from_bytes(self.take(16), "big")

    def i128(self) -> int:
        return int.from_bytes(self.take(16), "big", signed=True)

    def endpoint(self) -> Endpoint:
        return Endpoint(self.u32(), self.u32(), self.take(ADDRESS_LEN))

    def event(self) -> ToCreditEvent:
        return ToCreditEvent(
            self.endpoint(), self.endpoint(), self.u128(), self.u64(), self.u32(), self.take(TXID_LEN)
        )

    def revert(self) -> RevertRecord:
        return RevertRecord(self.endpoint(), self.u128(), self.endpoint(), self.take(TXID_LEN))

    def cell(self) -> PartStateCell:
        balance = self.i128()
        credits = tuple(self.event() for _ in range(self.u32()))
        reverts = tuple(self.revert() for _ in range(self.u32()))
        return PartStateCell(balance, credits, reverts)

    def done(self) -> None:
        if self.pos != len(self.data):
            raise StructuralError(f"{len(self.data) - self.pos} trailing bytes")


def decode_state(data: bytes) -> ShardState:
    r = _Reader(data)
    shard_id, block_number = r.u32(), r.u64()
    shards, ees = r.u32(), r.u32()
    matrix = [[r.cell() for _ in range(ees)] for _ in range(shards)]
    outstanding = {}
    for _ in range(r.u32()):
        key = (r.u32(), r.u32(), r.u64())
        outstanding[key] = tuple(r.event() for _ in range(r.u32()))
    users = {}
    for _ in range(r.u32()):
        ee, user = r.u32(), r.take(ADDRESS_LEN)
        users[(ee, user)] = r.u128()
    seen = {}
    for _ in range(r.u32()):
        t = r.take(TXID_LEN)
        seen[t] = r.u64()
    r.done()
    return ShardState(shard_id, block_number, matrix, outstanding, users, seen)


def decode_event(data: bytes) -> ToCreditEvent:
    r = _Reader(data)
    ev = r.event()
    r.done()
    return ev


def decode_cell(data: bytes) -> PartStateCell:
    r = _Reader(data)
    c = r.cell()
    r.done()
    return c


PROOF_FIXED_SIZE = 8 + 4 + 8
MAX_PROOF_DEPTH = 64  # leaf counts are u64

# Per-cell upper bound on fetched bytes, excluding transient records:
# the fixed cell leaf plus a proof of maximal depth.
FETCH_PER_CELL = CELL_LEAF_FIXED_SIZE + PROOF_FIXED_SIZE + 32 * MAX_PROOF_DEPTH
# Per transient record (credit or revert) carried in a fetched cell.
FETCH_PER_RECORD = max(EVENT_SIZE, REVERT_SIZE)
