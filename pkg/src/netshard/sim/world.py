"""Lockstep multi-shard world.

Every slot runs the same barrier-separated phases: deliver scheduled
transfers, apply injections, let each shard's proposer build a block from
the previous slot's crosslinked snapshots, have each committee vote, then
commit accepted blocks and register their crosslinks.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable

from ..attester import Verdict, committee_decide, invert, validate_block
from ..beacon import Beacon, Crosslink
from ..codec import FETCH_PER_CELL, FETCH_PER_RECORD
from ..core import CreditTx, DebitTx, Endpoint, LossRecord, PartStateCell, ShardState, StructuralError
from ..merkle import EMPTY_ROOT, MerkleTree, commit_state, prove_cell, state_tree
from ..proposer import (
    POLICIES,
    CellProof,
    ChainEnv,
    ExecutionHook,
    Proposal,
    RemoteStateView,
    Snapshot,
    propose_block,
)
from ..signing import sign_debit
from .faults import byzantine_proposal
from .outcomes import OutcomeTracker
from .scenario import EXPECTED_CHECK, ScenarioConfig
from .trace import block_json, views_digest

log = logging.getLogger(__name__)

Observer = Callable[..., None]


@dataclass
class SlotRecord:
    """What the harness measured for one proposed block."""

    shard: int
    slot: int
    proposer: str
    decision: str
    verdict: Verdict
    txs: int
    records_written: int
    expired: int
    bytes_fetched: int
    bytes_bound: int


@dataclass(frozen=True)
class Removal:
    endpoint: Endpoint
    amount: int
    slot: int


class World:
    def __init__(self, config: ScenarioConfig, observer: Observer | None = None, audit_every_slot: bool = False):
        self.config = config
        self.params = config.params
        self.observer = observer
        self.audit_every_slot = audit_every_slot
        S = config.shards

        self.beacon = Beacon(0)
        self.events: dict[tuple[int, int], tuple] = {}
        hook = ExecutionHook(
            debit_failures=[i.tx_id for i in config.injections if i.kind == "debit-exec-fail"],
            credit_failures=[i.tx_id for i in config.injections if i.kind == "credit-exec-fail"],
            withheld=[i.tx_id for i in config.injections if i.kind == "withhold-credit"],
            seed=config.seed,
            debit_fail_rate=config.debit_fail_rate,
            credit_fail_rate=config.credit_fail_rate,
        )
        self.env = ChainEnv(self.params, self.beacon, self.events, hook)
        self.policy = POLICIES[config.policy]

        self.states: list[ShardState] = []
        for s in range(S):
            matrix = [[PartStateCell(b) for b in row] for row in config.part_balances[s]]
            users = {(e.ee, e.user): b for e, b in config.genesis_users if e.shard == s}
            self.states.append(ShardState(s, 0, matrix, {}, users))
        self.history: list[dict[int, ShardState]] = [{0: st} for st in self.states]
        self._trees: dict[tuple[int, int], MerkleTree] = {}
        self.roots = [self._tree(s, 0).root for s in range(S)]
        self.block_load: dict[tuple[int, int], int] = {}
        self.pools: list[list] = [[] for _ in range(S)]
        self.slot = 0

        self.transfers_at = defaultdict(list)
        for t in config.transfers:
            self.transfers_at[t.submit_slot].append(t)
        self.removals_at = defaultdict(list)
        self.byzantine_bp: dict[tuple[int, int], str] = {}
        self.byzantine_attesters: dict[int, set[int]] = defaultdict(set)
        for inj in config.injections:
            if inj.kind == "remove-account":
                self.removals_at[inj.slot].append(inj.endpoint)
            elif inj.kind == "byzantine-bp":
                self.byzantine_bp[(inj.shard, inj.slot)] = inj.behavior
            elif inj.kind == "byzantine-attester":
                self.byzantine_attesters[inj.shard].add(inj.index)

        self.tracker = OutcomeTracker()
        self.losses: list[LossRecord] = []
        self.removed: list[Removal] = []
        self.slot_records: list[SlotRecord] = []
        self.accepted_slots: list[list[int]] = [[0] for _ in range(S)]
        self.rejected_slots: list[list[int]] = [[] for _ in range(S)]
        self.issuance = sum(st.matrix_total() for st in self.states)
        self.conservation_failures: list[int] = []
        self.reconciliation_failures: list[tuple[int, str]] = []
        self.quiescent_slots: list[int] = []
        self.negative_part_balance_seen = any(
            c.balance < 0 for st in self.states for row in st.part_state for c in row
        )

        self.records: list[dict] = [{"type": "header", "version": 1, "scenario": config.to_json()}]
        for s in range(S):
            link = Crosslink(s, 0, self.roots[s], EMPTY_ROOT)
            self.beacon.submit_crosslink(link)
            self.events[(s, 0)] = ()
            self.block_load[(s, 0)] = 0
            self.records.append(_link_json(link))

    # -- snapshots and views ----------------------------------------------------

    def _tree(self, shard: int, block: int) -> MerkleTree:
        key = (shard, block)
        tree = self._trees.get(key)
        if tree is None:
            tree = self._trees[key] = state_tree(self.history[shard][block])
        return tree

    def _snapshot(self, source: int, block: int, target: int) -> Snapshot:
        state = self.history[source][block]
        tree = self._tree(source, block)
        N = self.params.ees
        cells = tuple(CellProof(ee, state.cell(target, ee), prove_cell(tree, target, ee, N)) for ee in range(N))
        return Snapshot(source, block, tree.root, cells)

    def build_views(self, local: int, slot: int) -> dict[int, RemoteStateView]:
        start = self.states[local].block_number
        views = {}
        for n in range(self.params.shards):
            if n == local:
                continue
            blocks = set(self.beacon.slots_between(n, start, slot - 1))
            blocks.add(self.beacon.latest_slot(n, slot - 1))
            snaps = tuple(self._snapshot(n, b, local) for b in sorted(blocks))
            views[n] = RemoteStateView(n, local, start, snaps)
        return views

    def bytes_bound(self, views: dict[int, RemoteStateView]) -> int:
        """Encoding-derived ceiling on what ``views`` may weigh."""
        N = self.params.ees
        total = 0
        for v in views.values():
            for snap in v.snapshots:
                total += N * FETCH_PER_CELL + FETCH_PER_RECORD * self.block_load[(v.source, snap.block_number)]
        return total

    # -- slot phases -----------------------------------------------------------------

    def _deliver(self, t: int) -> None:
        for ts in self.transfers_at.get(t, ()):
            tx = DebitTx(ts.tx_id, ts.sender, ts.recipient, ts.amount)
            signer = b"\x00" * 20 if ts.bad_signature else None
            tx = sign_debit(tx, self.env.scheme, signer)
            self.pools[ts.sender.shard].append(tx)
            self.tracker.submit(tx, t)

    def _remove_accounts(self, t: int) -> None:
        for ep in self.removals_at.get(t, ()):
            state = self.states[ep.shard].clone()
            amount = state.user_balance.pop((ep.ee, ep.user), None)
            if amount is None:
                continue
            self.states[ep.shard] = state
            self.roots[ep.shard] = commit_state(state)
            self.removed.append(Removal(ep, amount, t))

    def _committee(self, shard: int, verdict: Verdict) -> list[Verdict]:
        byz = self.byzantine_attesters.get(shard, set())
        return [invert(verdict) if i in byz else verdict for i in range(self.config.attesters_per_shard)]

    def open_slot(self) -> int:
        """Phases (a) and (b) of the next slot; returns its number."""
        t = self.slot + 1
        self.beacon.advance(t)
        self._deliver(t)
        self._remove_accounts(t)
        return t

    def step(self) -> None:
        t = self.open_slot()
        S = self.params.shards

        proposals: dict[int, tuple[Proposal, str, dict]] = {}
        for s in range(S):
            views = self.build_views(s, t)
            honest = propose_block(
                self.states[s], views, self.pools[s], t, self.env, self.policy, parent_root=self.roots[s]
            )
            behavior = self.byzantine_bp.get((s, t))
            if behavior:
                proposals[s] = (byzantine_proposal(behavior, honest, self.env), f"byzantine:{behavior}", views)
            else:
                proposals[s] = (honest, "honest", views)

        decisions = {}
        for s in range(S):
            prop, who, honest_views = proposals[s]
            verdict = validate_block(
                prop.block, self.states[s], prop.views, self.env, post_state=prop.post_state, parent_root=self.roots[s]
            )
            committee = self._committee(s, verdict)
            decision = committee_decide(committee, self.config.quorum)
            decisions[s] = decision
            if self.observer is not None:
                self.observer(self, s, t, self.states[s], honest_views, prop, decision, self.roots[s])
            b = prop.block
            self.slot_records.append(
                SlotRecord(s, t, who, decision, verdict, len(b.txs), b.records_written, len(b.expired),
                           b.bytes_fetched, self.bytes_bound(prop.views))
            )
            rec = {"type": "block", "proposer": who, "views_digest": views_digest(prop.views), **block_json(b)}
            self.records.append(rec)
            byz = self.byzantine_attesters.get(s, set())
            self.records.append({
                "type": "verdicts",
                "shard": s,
                "slot": t,
                "decision": decision,
                "expected_check": EXPECTED_CHECK.get(who.partition(":")[2]),
                "verdicts": [
                    {"attester": i, "byzantine": i in byz, "valid": v.valid, "violations": [list(x) for x in v.violations]}
                    for i, v in enumerate(committee)
                ],
            })

        for s in range(S):
            prop = proposals[s][0]
            if decisions[s] == "accepted":
                self._commit(s, prop)
            else:
                self.rejected_slots[s].append(t)
                log.info("shard %d slot %d: block rejected (%s)", s, t, proposals[s][1])

        self.slot = t
        self._prune()
        total = sum(st.matrix_total() for st in self.states)
        if total != self.issuance:
            self.conservation_failures.append(t)
        if not self.negative_part_balance_seen:
            self.negative_part_balance_seen = any(
                c.balance < 0 for st in self.states for row in st.part_state for c in row
            )
        in_flight = len(self.tracker.in_flight())
        mismatches = None
        if not in_flight:
            self.quiescent_slots.append(t)
            mismatches = self.reconcile()
            self.reconciliation_failures.extend((t, m) for m in mismatches)
        if self.audit_every_slot:
            self.records.append({
                "type": "audit",
                "slot": t,
                "issuance": self.issuance,
                "total": total,
                "conservation": total == self.issuance,
                "in_flight": in_flight,
                "reconciled": None if mismatches is None else not mismatches,
            })

    def reconcile(self) -> list[str]:
        """Compare each EE-on-shard real balance with what its users account for.

        Only meaningful when no transfer is in flight.  Losses and removed
        accounts stay in the EE's real balance, so they count on the user side.
        """
        S, N = self.params.shards, self.params.ees
        users = [[0] * N for _ in range(S)]
        for s, st in enumerate(self.states):
            for (ee, _user), bal in st.user_balance.items():
                users[s][ee] += bal
        for loss in self.losses:
            users[loss.endpoint.shard][loss.endpoint.ee] += loss.amount
        for r in self.removed:
            users[r.endpoint.shard][r.endpoint.ee] += r.amount
        out = []
        for s in range(S):
            for ee in range(N):
                real = sum(st.part_state[s][ee].balance for st in self.states)
                if real != users[s][ee]:
                    out.append(f"shard {s} EE {ee}: real balance {real} != accounted {users[s][ee]}")
        return out

    def _commit(self, s: int, prop: Proposal) -> None:
        b = prop.block
        t = b.slot
        self.states[s] = prop.post_state
        self.history[s][t] = prop.post_state
        self.roots[s] = b.post_state_root
        self.events[(s, t)] = b.events
        self.block_load[(s, t)] = len(b.txs) + len(b.expired)
        self.accepted_slots[s].append(t)
        link = Crosslink(s, t, b.post_state_root, b.event_root)
        res = self.beacon.submit_crosslink(link)
        if not res.accepted:
            raise StructuralError(f"crosslink for shard {s} slot {t} refused: {res.reason}")
        self.records.append(_link_json(link))
        included = {tx.id for tx in b.txs if isinstance(tx, DebitTx)}
        included_credits = {tx for tx in b.txs if isinstance(tx, CreditTx)}
        self.pools[s] = [tx for tx in self.pools[s] if tx.id not in included and tx not in included_credits]
        self.tracker.observe(b)
        self.losses.extend(b.losses)

    def _prune(self) -> None:
        floor = min(st.block_number for st in self.states)
        for s, hist in enumerate(self.history):
            latest = self.states[s].block_number
            for b in [b for b in hist if b < floor and b != latest]:
                del hist[b]
                self._trees.pop((s, b), None)

    def run(self, slots: int | None = None) -> None:
        for _ in range(self.config.slots if slots is None else slots):
            self.step()


def _link_json(link: Crosslink) -> dict:
    return {
        "type": "crosslink",
        "shard": link.shard,
        "slot": link.slot,
        "state_root": link.state_root.hex(),
        "event_root": link.event_root.hex(),
    }
