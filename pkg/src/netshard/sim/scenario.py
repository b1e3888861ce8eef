"""Scenario files: genesis, scheduled transfers and fault injections."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from ..core import MAX_AMOUNT, Endpoint, address, tx_id
from ..proposer import POLICIES, ProtocolParams

BBP_BEHAVIORS = (
    "false-part-balances",
    "false-credits",
    "false-reverts",
    "skip-outstanding-update",
    "skip-revert-processing",
    "wrong-event",
    "missing-revert",
    "wrong-ee-transfer",
)

# the check an honest committee should cite first for each deviation
EXPECTED_CHECK = {
    "false-part-balances": 1,
    "false-credits": 1,
    "false-reverts": 1,
    "skip-outstanding-update": 2,
    "skip-revert-processing": 3,
    "wrong-event": 4,
    "missing-revert": 7,
    "wrong-ee-transfer": 8,
}

INJECTION_KINDS = (
    "byzantine-bp",
    "credit-exec-fail",
    "debit-exec-fail",
    "remove-account",
    "byzantine-attester",
    "withhold-credit",
)


class ScenarioError(ValueError):
    def __init__(self, code: str, where: str, detail: str = ""):
        self.code = code
        self.where = where
        super().__init__(f"{code} at {where}" + (f": {detail}" if detail else ""))


@dataclass(frozen=True)
class TransferSpec:
    submit_slot: int
    tx_id: bytes
    sender: Endpoint
    recipient: Endpoint
    amount: int
    bad_signature: bool = False


@dataclass(frozen=True)
class FaultInjection:
    kind: str
    behavior: str | None = None
    shard: int | None = None
    slot: int | None = None
    tx_id: bytes | None = None
    endpoint: Endpoint | None = None
    index: int | None = None


@dataclass
class ScenarioConfig:
    shards: int
    ees: int
    genesis_users: list[tuple[Endpoint, int]]
    part_balances: list[list[list[int]]]  # [holder][shard][ee]
    transfers: list[TransferSpec] = field(default_factory=list)
    injections: list[FaultInjection] = field(default_factory=list)
    time_out: int = 4
    max_block_txs: int = 128
    quorum: Fraction = Fraction(2, 3)
    attesters_per_shard: int = 4
    seed: int = 0
    slots: int = 10
    policy: str = "fifo"
    literal_pair_gate: bool = False
    debit_fail_rate: float = 0.0
    credit_fail_rate: float = 0.0

    @property
    def params(self) -> ProtocolParams:
        return ProtocolParams(self.shards, self.ees, self.time_out, self.max_block_txs, self.literal_pair_gate)

    def issuance(self) -> int:
        return sum(b for _, b in self.genesis_users)

    def to_json(self) -> dict[str, Any]:
        return {
            "shards": self.shards,
            "ees": self.ees,
            "time_out": self.time_out,
            "max_block_txs": self.max_block_txs,
            "quorum": f"{self.quorum.numerator}/{self.quorum.denominator}",
            "attesters_per_shard": self.attesters_per_shard,
            "seed": self.seed,
            "slots": self.slots,
            "policy": self.policy,
            "literal_pair_gate": self.literal_pair_gate,
            "debit_fail_rate": self.debit_fail_rate,
            "credit_fail_rate": self.credit_fail_rate,
            "genesis": {
                "users": [{**_ep_json(e), "balance": b} for e, b in self.genesis_users],
                "part_balances": [
                    {"holder": h, "shard": s, "ee": e, "balance": b}
                    for h, m in enumerate(self.part_balances)
                    for s, row in enumerate(m)
                    for e, b in enumerate(row)
                    if b
                ],
            },
            "transfers": [
                {
                    "slot": t.submit_slot,
                    "id": t.tx_id.hex(),
                    "sender": _ep_json(t.sender),
                    "recipient": _ep_json(t.recipient),
                    "amount": t.amount,
                    **({"bad_signature": True} if t.bad_signature else {}),
                }
                for t in self.transfers
            ],
            "injections": [_inj_json(i) for i in self.injections],
        }


def _ep_json(e: Endpoint) -> dict:
    return {"shard": e.shard, "ee": e.ee, "user": e.user.hex()}


def _inj_json(i: FaultInjection) -> dict:
    out: dict[str, Any] = {"kind": i.kind}
    if i.behavior is not None:
        out["behavior"] = i.behavior
    if i.shard is not None:
        out["shard"] = i.shard
    if i.slot is not None:
        out["slot"] = i.slot
    if i.tx_id is not None:
        out["tx"] = i.tx_id.hex()
    if i.endpoint is not None:
        out["endpoint"] = _ep_json(i.endpoint)
    if i.index is not None:
        out["index"] = i.index
    return out


# -- parsing -----------------------------------------------------------------------


def _int(d: dict, key: str, where: str, default=None, lo: int | None = None) -> int:
    if key not in d:
        if default is None:
            raise ScenarioError("missing-field", f"{where}.{key}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError("bad-type", f"{where}.{key}", f"expected integer, got {v!r}")
    if lo is not None and v < lo:
        raise ScenarioError("out-of-range", f"{where}.{key}", f"{v} < {lo}")
    return v


def _endpoint(d: Any, where: str, shards: int, ees: int) -> Endpoint:
    if not isinstance(d, dict):
        raise ScenarioError("bad-type", where, "expected an endpoint object")
    s = _int(d, "shard", where)
    e = _int(d, "ee", where)
    if not 0 <= s < shards:
        raise ScenarioError("bad-shard", f"{where}.shard", f"{s} not in [0, {shards})")
    if not 0 <= e < ees:
        raise ScenarioError("bad-ee", f"{where}.ee", f"{e} not in [0, {ees})")
    user = d.get("user")
    if not isinstance(user, str) or not user:
        raise ScenarioError("bad-type", f"{where}.user", "expected a user label or 40-hex address")
    return Endpoint(s, e, address(user))


def _fraction(v: Any, where: str) -> Fraction:
    try:
        f = Fraction(v) if not isinstance(v, float) else Fraction(v).limit_denominator(1000)
    except (ValueError, TypeError, ZeroDivisionError):
        raise ScenarioError("bad-type", where, f"not a fraction: {v!r}") from None
    if not 0 < f <= 1:
        raise ScenarioError("out-of-range", where, "quorum must be in (0, 1]")
    return f


def _rate(d: dict, key: str) -> float:
    v = d.get(key, 0.0)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0 <= v <= 1:
        raise ScenarioError("out-of-range", key, "rate must be in [0, 1]")
    return float(v)


def parse_scenario(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ScenarioError("bad-type", "scenario", "expected a JSON object")
    shards = _int(data, "shards", "scenario", lo=1)
    ees = _int(data, "ees", "scenario", lo=1)
    policy = data.get("policy", "fifo")
    if policy not in POLICIES:
        raise ScenarioError("bad-policy", "policy", f"{policy!r} not in {sorted(POLICIES)}")
    gate = data.get("literal_pair_gate", False)
    if not isinstance(gate, bool):
        raise ScenarioError("bad-type", "literal_pair_gate")

    genesis = data.get("genesis", {})
    users: list[tuple[Endpoint, int]] = []
    seen_users = set()
    for i, u in enumerate(genesis.get("users", [])):
        where = f"genesis.users[{i}]"
        ep = _endpoint(u, where, shards, ees)
        bal = _int(u, "balance", where, lo=0)
        if bal > MAX_AMOUNT:
            raise ScenarioError("out-of-range", f"{where}.balance")
        if (ep.ee, ep.user) in seen_users:
            raise ScenarioError("duplicate-user", where)
        seen_users.add((ep.ee, ep.user))
        users.append((ep, bal))

    homed = [[0] * ees for _ in range(shards)]
    for ep, bal in users:
        homed[ep.shard][ep.ee] += bal
    if "part_balances" in genesis:
        parts = [[[0] * ees for _ in range(shards)] for _ in range(shards)]
        for i, p in enumerate(genesis["part_balances"]):
            where = f"genesis.part_balances[{i}]"
            h = _int(p, "holder", where)
            if not 0 <= h < shards:
                raise ScenarioError("bad-shard", f"{where}.holder")
            ep = _endpoint({**p, "user": "_"}, where, shards, ees)
            b = p.get("balance")
            if isinstance(b, bool) or not isinstance(b, int):
                raise ScenarioError("bad-type", f"{where}.balance")
            parts[h][ep.shard][ep.ee] += b
    else:
        parts = [[[homed[s][e] if h == s else 0 for e in range(ees)] for s in range(shards)] for h in range(shards)]
    for s in range(shards):
        for e in range(ees):
            total = sum(parts[h][s][e] for h in range(shards))
            if total != homed[s][e]:
                raise ScenarioError(
                    "genesis-imbalance", f"genesis.part_balances[{s}][{e}]",
                    f"part-balances sum to {total}, users hold {homed[s][e]}",
                )

    transfers = []
    ids = set()
    for i, t in enumerate(data.get("transfers", [])):
        where = f"transfers[{i}]"
        label = t.get("id")
        if not isinstance(label, str) or not label:
            raise ScenarioError("missing-field", f"{where}.id")
        tid = tx_id(label)
        if tid in ids:
            raise ScenarioError("duplicate-tx", f"{where}.id", label)
        ids.add(tid)
        amount = _int(t, "amount", where, lo=1)
        transfers.append(
            TransferSpec(
                _int(t, "slot", where, lo=1),
                tid,
                _endpoint(t.get("sender"), f"{where}.sender", shards, ees),
                _endpoint(t.get("recipient"), f"{where}.recipient", shards, ees),
                amount,
                bool(t.get("bad_signature", False)),
            )
        )

    attesters = _int(data, "attesters_per_shard", "scenario", default=4, lo=1)
    injections = []
    for i, j in enumerate(data.get("injections", [])):
        injections.append(_injection(j, f"injections[{i}]", shards, ees, ids, attesters))

    return ScenarioConfig(
        shards=shards,
        ees=ees,
        genesis_users=users,
        part_balances=parts,
        transfers=transfers,
        injections=injections,
        time_out=_int(data, "time_out", "scenario", default=4, lo=1),
        max_block_txs=_int(data, "max_block_txs", "scenario", default=128, lo=1),
        quorum=_fraction(data.get("quorum", "2/3"), "quorum"),
        attesters_per_shard=attesters,
        seed=_int(data, "seed", "scenario", default=0, lo=0),
        slots=_int(data, "slots", "scenario", default=10, lo=0),
        policy=policy,
        literal_pair_gate=gate,
        debit_fail_rate=_rate(data, "debit_fail_rate"),
        credit_fail_rate=_rate(data, "credit_fail_rate"),
    )


def _injection(j: Any, where: str, shards: int, ees: int, ids: set, attesters: int) -> FaultInjection:
    if not isinstance(j, dict):
        raise ScenarioError("bad-type", where)
    kind = j.get("kind")
    if kind not in INJECTION_KINDS:
        raise ScenarioError("bad-injection", f"{where}.kind", repr(kind))
    if kind in ("credit-exec-fail", "debit-exec-fail", "withhold-credit"):
        label = j.get("tx")
        if not isinstance(label, str):
            raise ScenarioError("missing-field", f"{where}.tx")
        tid = tx_id(label)
        if tid not in ids:
            raise ScenarioError("unknown-tx", f"{where}.tx", label)
        return FaultInjection(kind, tx_id=tid)
    if kind == "remove-account":
        return FaultInjection(
            kind,
            endpoint=_endpoint(j.get("endpoint"), f"{where}.endpoint", shards, ees),
            slot=_int(j, "slot", where, lo=1),
        )
    shard = _int(j, "shard", where)
    if not 0 <= shard < shards:
        raise ScenarioError("bad-shard", f"{where}.shard")
    if kind == "byzantine-attester":
        index = _int(j, "index", where, lo=0)
        if index >= attesters:
            raise ScenarioError("out-of-range", f"{where}.index", f"only {attesters} attesters")
        return FaultInjection(kind, shard=shard, index=index)
    behavior = j.get("behavior")
    if behavior not in BBP_BEHAVIORS:
        raise ScenarioError("bad-behavior", f"{where}.behavior", repr(behavior))
    if shards < 2 and behavior.startswith("false-"):
        raise ScenarioError("bad-behavior", f"{where}.behavior", "needs a remote shard")
    return FaultInjection(kind, behavior=behavior, shard=shard, slot=_int(j, "slot", where, lo=1))


def load_scenario(path: str | Path) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("bad-json", str(path), str(exc)) from None
    return parse_scenario(data)
