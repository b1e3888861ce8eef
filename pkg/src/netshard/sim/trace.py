"""JSONL trace records and the JSON forms of protocol objects.

Every line is one object with a ``type`` field: ``header`` (the effective
scenario), ``crosslink``, ``block``, ``verdicts``, ``audit`` (per-slot
snapshot, optional), ``outcome`` (one per transfer) and a final ``summary``.
Keys are sorted and separators fixed so equal runs give equal bytes.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Iterator

from ..codec import cell_leaf, encode_proof
from ..core import CreditTx, DebitTx, Endpoint, LossRecord, ToCreditEvent
from ..merkle import MerkleProof
from ..proposer import Block, EETransfer, Receipt, RemoteStateView


def endpoint_json(e: Endpoint) -> dict:
    return {"shard": e.shard, "ee": e.ee, "user": e.user.hex()}


def endpoint_from(d: dict) -> Endpoint:
    return Endpoint(d["shard"], d["ee"], bytes.fromhex(d["user"]))


def event_json(e: ToCreditEvent) -> dict:
    return {
        "sender": endpoint_json(e.sender),
        "recipient": endpoint_json(e.recipient),
        "amount": e.amount,
        "block": e.block_number,
        "index": e.index,
        "tx": e.tx_id.hex(),
    }


def event_from(d: dict) -> ToCreditEvent:
    return ToCreditEvent(
        endpoint_from(d["sender"]), endpoint_from(d["recipient"]), d["amount"], d["block"], d["index"],
        bytes.fromhex(d["tx"]),
    )


def tx_json(tx) -> dict:
    if isinstance(tx, DebitTx):
        return {
            "kind": "debit",
            "id": tx.id.hex(),
            "sender": endpoint_json(tx.sender),
            "recipient": endpoint_json(tx.recipient),
            "amount": tx.amount,
            "signature": tx.signature.hex(),
        }
    p = tx.proof
    return {
        "kind": "credit",
        "event": event_json(tx.event),
        "proof": {"leaf_index": p.leaf_index, "siblings": [s.hex() for s in p.siblings], "leaf_count": p.leaf_count},
    }


def tx_from(d: dict):
    if d["kind"] == "debit":
        return DebitTx(
            bytes.fromhex(d["id"]), endpoint_from(d["sender"]), endpoint_from(d["recipient"]), d["amount"],
            bytes.fromhex(d["signature"]),
        )
    p = d["proof"]
    proof = MerkleProof(p["leaf_index"], tuple(bytes.fromhex(s) for s in p["siblings"]), p["leaf_count"])
    return CreditTx(event_from(d["event"]), proof)


def block_json(b: Block) -> dict:
    return {
        "shard": b.shard,
        "slot": b.slot,
        "parent_state_root": b.parent_state_root.hex(),
        "txs": [tx_json(t) for t in b.txs],
        "receipts": [{"success": r.success, "reason": r.reason} for r in b.receipts],
        "events": [event_json(e) for e in b.events],
        "event_root": b.event_root.hex(),
        "post_state_root": b.post_state_root.hex(),
        "ingested": b.ingested,
        "expired": [t.hex() for t in b.expired],
        "reverts_applied": [t.hex() for t in b.reverts_applied],
        "losses": [{"endpoint": endpoint_json(x.endpoint), "amount": x.amount, "tx": x.tx_id.hex()} for x in b.losses],
        "ee_transfers": [[t.src_ee, t.dest_shard, t.dest_ee, t.amount] for t in b.ee_transfers],
        "bytes_fetched": b.bytes_fetched,
        "records_written": b.records_written,
    }


def block_from(d: dict) -> Block:
    return Block(
        shard=d["shard"],
        slot=d["slot"],
        parent_state_root=bytes.fromhex(d["parent_state_root"]),
        txs=tuple(tx_from(t) for t in d["txs"]),
        receipts=tuple(Receipt(r["success"], r["reason"]) for r in d["receipts"]),
        events=tuple(event_from(e) for e in d["events"]),
        event_root=bytes.fromhex(d["event_root"]),
        post_state_root=bytes.fromhex(d["post_state_root"]),
        ingested=d["ingested"],
        expired=tuple(bytes.fromhex(t) for t in d["expired"]),
        reverts_applied=tuple(bytes.fromhex(t) for t in d["reverts_applied"]),
        losses=tuple(
            LossRecord(endpoint_from(x["endpoint"]), x["amount"], bytes.fromhex(x["tx"])) for x in d["losses"]
        ),
        ee_transfers=tuple(EETransfer(*t) for t in d["ee_transfers"]),
        bytes_fetched=d["bytes_fetched"],
        records_written=d["records_written"],
    )


def views_digest(views: dict[int, RemoteStateView]) -> str:
    """Hash of exactly what a proposer showed its attesters."""
    h = hashlib.sha256()
    for n in sorted(views):
        v = views[n]
        h.update(f"{v.source}:{v.target}:{v.window_start}".encode())
        for snap in v.snapshots:
            h.update(snap.block_number.to_bytes(8, "big") + snap.state_root)
            for cp in snap.cells:
                h.update(cell_leaf(v.target, cp.ee, cp.cell) + encode_proof(cp.proof))
    return h.hexdigest()


def dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w") as f:
        for r in records:
            f.write(dumps(r) + "\n")


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                yield json.loads(line)
