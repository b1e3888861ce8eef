"""Seeded random scenarios for property suites and the CLI."""

from __future__ import annotations

import random
from typing import Any


def generate(
    seed: int,
    shards: int = 3,
    ees: int = 2,
    transfers: int = 1000,
    users: int = 100,
    slots: int = 200,
    time_out: int = 4,
    credit_fail_rate: float = 0.0,
    debit_fail_rate: float = 0.0,
    removals: int = 0,
    doomed: int = 0,
    local_fraction: float = 0.05,
    skew_fraction: float = 0.5,
    max_block_txs: int = 128,
) -> dict[str, Any]:
    """Return a scenario document (the same JSON shape ``load_scenario`` reads).

    Transfers are submitted no later than ``slots - time_out - 3`` so every
    one of them can reach a terminal class before the run ends.  Roughly
    ``skew_fraction`` of the (shard, EE) pairs start with part-balances
    spread unevenly across holders, some of them negative.

    ``removals`` deletes random accounts at random slots.  ``doomed`` picks
    cross-shard transfers whose credit is forced to fail and whose sender is
    removed one slot after submission, so the refund usually finds no
    account and is recorded as a loss.
    """
    rng = random.Random(seed)
    homes = []
    doc_users = []
    for i in range(users):
        s, e = rng.randrange(shards), rng.randrange(ees)
        bal = rng.randrange(1_000, 10_001)
        homes.append((s, e, f"u{i}", bal))
        doc_users.append({"shard": s, "ee": e, "user": f"u{i}", "balance": bal})

    homed = [[0] * ees for _ in range(shards)]
    for s, e, _, b in homes:
        homed[s][e] += b
    parts = []
    for s in range(shards):
        for e in range(ees):
            total = homed[s][e]
            alloc = [0] * shards
            alloc[s] = total
            if shards > 1 and rng.random() < skew_fraction:
                other = rng.choice([h for h in range(shards) if h != s])
                shift = rng.randrange(1, 2 * total + 2_000)
                alloc[s] -= shift
                alloc[other] += shift
            parts.extend({"holder": h, "shard": s, "ee": e, "balance": b} for h, b in enumerate(alloc) if b)

    last = max(1, slots - time_out - 3)
    by_pair: dict[tuple[int, int], list] = {}
    for h in homes:
        by_pair.setdefault((h[0], h[1]), []).append(h)
    doc_transfers = []
    for i in range(transfers):
        src = rng.choice(homes)
        if rng.random() < local_fraction:
            dst = rng.choice(by_pair[(src[0], src[1])])
        else:
            dst = rng.choice(homes)
        amount = rng.randrange(1, max(2, src[3] // 10))
        doc_transfers.append({
            "slot": rng.randrange(1, last + 1),
            "id": f"t{i}",
            "sender": {"shard": src[0], "ee": src[1], "user": src[2]},
            "recipient": {"shard": dst[0], "ee": dst[1], "user": dst[2]},
            "amount": amount,
        })
    doc_transfers.sort(key=lambda t: t["slot"])

    injections = []
    for u in rng.sample(homes, min(removals, len(homes))):
        injections.append({
            "kind": "remove-account",
            "endpoint": {"shard": u[0], "ee": u[1], "user": u[2]},
            "slot": rng.randrange(1, last + 1),
        })

    crossing = [t for t in doc_transfers if (t["sender"]["shard"], t["sender"]["ee"])
                != (t["recipient"]["shard"], t["recipient"]["ee"]) and t["slot"] < last]
    for t in rng.sample(crossing, min(doomed, len(crossing))):
        injections.append({"kind": "credit-exec-fail", "tx": t["id"]})
        injections.append({"kind": "remove-account", "endpoint": t["sender"], "slot": t["slot"] + 1})

    return {
        "shards": shards,
        "ees": ees,
        "seed": seed,
        "slots": slots,
        "time_out": time_out,
        "max_block_txs": max_block_txs,
        "credit_fail_rate": credit_fail_rate,
        "debit_fail_rate": debit_fail_rate,
        "genesis": {"users": doc_users, "part_balances": parts},
        "transfers": doc_transfers,
        "injections": injections,
    }
