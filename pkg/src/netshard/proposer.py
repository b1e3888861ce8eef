"""Honest block proposer for one shard at one slot.

A block is built in four phases: initialise from proof-checked remote part
states, ingest and expire pending credits, land user-level reverts, then
apply debits and credits and settle the EE-level netted transfers.  Every
function here is a pure transition over a :class:`BlockContext` working copy;
the pre-state and views are never mutated.
"""

from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

from .beacon import Beacon
from .codec import CELL_LEAF_FIXED_SIZE, EVENT_SIZE, REVERT_SIZE, encode_event, proof_size
from .core import (
    MAX_AMOUNT,
    TXID_LEN,
    CreditTx,
    DebitTx,
    LossRecord,
    PartStateCell,
    RevertRecord,
    ShardState,
    StructuralError,
    ToCreditEvent,
    _insert_sorted,
    checked_amount,
    netted_transfer,
)
from .merkle import MerkleProof, MerkleTree, commit_events, commit_state, event_leaves, verify, verify_cell
from .signing import DEFAULT_SCHEME, SignatureScheme, verify_signature

Tx = Union[DebitTx, CreditTx]


@dataclass(frozen=True)
class ProtocolParams:
    shards: int
    ees: int
    time_out: int = 4
    max_block_txs: int = 128
    literal_pair_gate: bool = False


# -- remote state views ---------------------------------------------------------


@dataclass(frozen=True)
class CellProof:
    ee: int
    cell: PartStateCell
    proof: MerkleProof

    def size(self) -> int:
        return (
            CELL_LEAF_FIXED_SIZE
            + EVENT_SIZE * len(self.cell.credits)
            + REVERT_SIZE * len(self.cell.reverts)
            + proof_size(self.proof)
        )


@dataclass(frozen=True)
class Snapshot:
    """The column ``[target][*]`` of one source shard's state at one block."""

    shard: int
    block_number: int
    state_root: bytes
    cells: tuple[CellProof, ...]

    def cell(self, ee: int) -> PartStateCell:
        return self.cells[ee].cell

    def size(self) -> int:
        return sum(c.size() for c in self.cells)


@dataclass(frozen=True)
class RemoteStateView:
    """Everything a proposer on ``target`` reads from ``source`` for one slot.

    ``snapshots`` covers every accepted source block from ``window_start`` to
    the previous slot, plus the source's latest accepted block.  In lockstep
    with no rejected blocks that is exactly the previous slot's state.
    """

    source: int
    target: int
    window_start: int
    snapshots: tuple[Snapshot, ...]

    @property
    def latest(self) -> Snapshot:
        return self.snapshots[-1]

    def window(self) -> list[Snapshot]:
        return [s for s in self.snapshots if s.block_number >= self.window_start]

    @property
    def bytes_fetched(self) -> int:
        return sum(s.size() for s in self.snapshots)


def check_views(
    views: Mapping[int, RemoteStateView],
    pre: ShardState,
    slot: int,
    beacon: Beacon,
    params: ProtocolParams,
) -> list[str]:
    """Return every problem with ``views``; empty means all proofs check out."""
    local = pre.shard_id
    problems = []
    for n in sorted(views):
        if n == local or not 0 <= n < params.shards:
            problems.append(f"unexpected view from shard {n}")
    for n in range(params.shards):
        if n == local:
            continue
        v = views.get(n)
        if v is None:
            problems.append(f"no part states from shard {n}")
            continue
        if v.source != n or v.target != local or v.window_start != pre.block_number:
            problems.append(f"view from shard {n} is addressed wrongly")
            continue
        expected = set(beacon.slots_between(n, pre.block_number, slot - 1))
        latest = beacon.latest_slot(n, slot - 1)
        if latest is not None:
            expected.add(latest)
        got = [s.block_number for s in v.snapshots]
        if got != sorted(expected):
            problems.append(f"shard {n} snapshots {got} != crosslinked {sorted(expected)}")
            continue
        for snap in v.snapshots:
            link = beacon.get_crosslink(n, snap.block_number)
            if link is None or link.state_root != snap.state_root:
                problems.append(f"shard {n} block {snap.block_number}: root not crosslinked")
                continue
            if len(snap.cells) != params.ees:
                problems.append(f"shard {n} block {snap.block_number}: {len(snap.cells)} cells")
                continue
            for ee, cp in enumerate(snap.cells):
                if cp.ee != ee or not verify_cell(snap.state_root, local, ee, params.ees, cp.cell, cp.proof):
                    problems.append(f"shard {n} block {snap.block_number} cell [{local}][{ee}]: bad proof")
    return problems


class ViewError(StructuralError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


# -- execution environment --------------------------------------------------------


def _unit(seed: int, kind: bytes, tx: bytes, slot: int) -> float:
    h = hashlib.sha256(seed.to_bytes(8, "big") + kind + tx + slot.to_bytes(8, "big")).digest()
    return int.from_bytes(h[:8], "big") / 2**64


class ExecutionHook:
    """Decides whether a transaction's user-level execution succeeds.

    Failures are either named explicitly by transaction id or drawn from a
    seeded hash of (tx id, slot), so every attester reaches the same answer.
    ``withheld`` credits are never picked by the default selection policies.
    """

    def __init__(
        self,
        debit_failures=(),
        credit_failures=(),
        withheld=(),
        seed: int = 0,
        debit_fail_rate: float = 0.0,
        credit_fail_rate: float = 0.0,
    ):
        self.debit_failures = frozenset(debit_failures)
        self.credit_failures = frozenset(credit_failures)
        self.withheld = frozenset(withheld)
        self.seed = seed
        self.debit_fail_rate = debit_fail_rate
        self.credit_fail_rate = credit_fail_rate

    def debit_ok(self, tx_id: bytes, slot: int) -> bool:
        if tx_id in self.debit_failures:
            return False
        return not (self.debit_fail_rate and _unit(self.seed, b"debit", tx_id, slot) < self.debit_fail_rate)

    def credit_ok(self, tx_id: bytes, slot: int) -> bool:
        if tx_id in self.credit_failures:
            return False
        return not (self.credit_fail_rate and _unit(self.seed, b"credit", tx_id, slot) < self.credit_fail_rate)

    def withholds(self, tx_id: bytes) -> bool:
        return tx_id in self.withheld


@dataclass
class ChainEnv:
    """Public chain data a proposer or attester can read: params, crosslinks,
    the emitted events of accepted blocks, the execution hook and signatures."""

    params: ProtocolParams
    beacon: Beacon
    events: Mapping[tuple[int, int], tuple[ToCreditEvent, ...]]
    hook: ExecutionHook = field(default_factory=ExecutionHook)
    scheme: SignatureScheme = DEFAULT_SCHEME
    _trees: dict = field(default_factory=dict, repr=False)

    def event_proof(self, event: ToCreditEvent) -> MerkleProof:
        key = (event.sender.shard, event.block_number)
        tree = self._trees.get(key)
        if tree is None:
            if key not in self.events:
                raise StructuralError(f"no event log for shard {key[0]} block {key[1]}")
            tree = self._trees[key] = MerkleTree(event_leaves(self.events[key]))
        return tree.prove(event.index)


# -- block records ------------------------------------------------------------------


@dataclass(frozen=True)
class Receipt:
    success: bool
    reason: str | None = None


@dataclass(frozen=True)
class Skipped:
    reason: str


@dataclass(frozen=True)
class EETransfer:
    src_ee: int
    dest_shard: int
    dest_ee: int
    amount: int


@dataclass(frozen=True)
class Block:
    shard: int
    slot: int
    parent_state_root: bytes
    txs: tuple[Tx, ...]
    receipts: tuple[Receipt, ...]
    events: tuple[ToCreditEvent, ...]
    event_root: bytes
    post_state_root: bytes
    ingested: int = 0
    expired: tuple[bytes, ...] = ()
    reverts_applied: tuple[bytes, ...] = ()
    losses: tuple[LossRecord, ...] = ()
    ee_transfers: tuple[EETransfer, ...] = ()
    bytes_fetched: int = 0
    records_written: int = 0


@dataclass(frozen=True)
class Proposal:
    block: Block
    post_state: ShardState
    views: Mapping[int, RemoteStateView]


# -- block context --------------------------------------------------------------------


@dataclass
class BlockContext:
    env: ChainEnv
    pre: ShardState
    work: ShardState
    views: Mapping[int, RemoteStateView]
    slot: int
    real_balance: dict[int, int]
    scratch: dict[tuple[int, int, int], int] = field(default_factory=lambda: defaultdict(int))
    txs: list = field(default_factory=list)
    receipts: list = field(default_factory=list)
    events: list = field(default_factory=list)
    ingested: int = 0
    expired: list = field(default_factory=list)
    reverts_applied: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    ee_transfers: list = field(default_factory=list)
    records_written: int = 0
    parent_root: bytes | None = None

    @property
    def local(self) -> int:
        return self.pre.shard_id

    @property
    def params(self) -> ProtocolParams:
        return self.env.params

    def outflow(self, ee: int, pair: tuple[int, int] | None = None) -> int:
        """Scratch outflow that gates a new transfer out of ``ee``.

        By default the total across all destination pairs; with the literal
        per-pair gate only the pair being transferred to.
        """
        if self.params.literal_pair_gate and pair is not None:
            return self.scratch.get((ee, *pair), 0)
        return sum(v for (src, _, _), v in self.scratch.items() if src == ee)

    def solvent(self, ee: int, pair: tuple[int, int], amount: int) -> bool:
        return self.real_balance[ee] > self.outflow(ee, pair) + amount

    def window_cells(self, ee: int):
        """(source shard, block, cell [local][ee]) for every unread source block."""
        out = [(self.local, self.pre.block_number, self.pre.cell(self.local, ee))]
        for n in sorted(self.views):
            for snap in self.views[n].window():
                out.append((n, snap.block_number, snap.cell(ee)))
        out.sort(key=lambda t: (t[0], t[1]))
        return out

    def include(self, tx: Tx, receipt: Receipt) -> Receipt:
        self.txs.append(tx)
        self.receipts.append(receipt)
        return receipt


def init_block(
    pre: ShardState,
    views: Mapping[int, RemoteStateView],
    slot: int,
    env: ChainEnv,
    verify_proofs: bool = True,
) -> BlockContext:
    if slot <= pre.block_number:
        raise StructuralError(f"slot {slot} does not follow block {pre.block_number}")
    if verify_proofs:
        problems = check_views(views, pre, slot, env.beacon, env.params)
        if problems:
            raise ViewError(problems)
    local = pre.shard_id
    real = {}
    for ee in range(env.params.ees):
        real[ee] = pre.cell(local, ee).balance + sum(v.latest.cell(ee).balance for v in views.values())
    work = pre.clone()
    work.block_number = slot
    work.part_state = [[c.cleared() for c in row] for row in work.part_state]
    horizon = slot - env.params.time_out
    work.seen_tx_ids = {t: b for t, b in work.seen_tx_ids.items() if b > horizon}
    return BlockContext(env, pre, work, views, slot, real)


def preprocess_pending_credits(ctx: BlockContext, ee: int) -> BlockContext:
    """Ingest credits emitted towards (local, ee) and expire timed-out ones."""
    work = ctx.work
    for source, _block, cell in ctx.window_cells(ee):
        for ev in cell.credits:
            if ev.sender.shard != source or ev.recipient.pair != (ctx.local, ee):
                raise StructuralError(f"credit record misplaced in shard {source} state")
            key = (ev.sender.shard, ev.sender.ee, ev.block_number)
            entry = work.outstanding_credits.get(key, ())
            grown = _insert_sorted(entry, ev, ToCreditEvent.sort_key)
            if grown is not entry:
                ctx.ingested += 1
                work.outstanding_credits[key] = grown

    time_out = ctx.params.time_out
    for key in sorted(work.outstanding_credits):
        src_shard, src_ee, src_block = key
        if src_block + time_out > ctx.slot:
            continue
        entry = work.outstanding_credits[key]
        expiring = [ev for ev in entry if ev.recipient.ee == ee]
        if not expiring:
            continue
        rest = tuple(ev for ev in entry if ev.recipient.ee != ee)
        if rest:
            work.outstanding_credits[key] = rest
        else:
            del work.outstanding_credits[key]
        for ev in expiring:
            work.part_state[src_shard][src_ee] = work.part_state[src_shard][src_ee].with_revert(
                RevertRecord.from_event(ev)
            )
            ctx.scratch[(ee, src_shard, src_ee)] += ev.amount
            ctx.expired.append(ev.tx_id)
            ctx.records_written += 1
    return ctx


def process_reverts(ctx: BlockContext, ee: int) -> BlockContext:
    """Refund senders named by revert records addressed to (local, ee)."""
    balances = ctx.work.user_balance
    for _source, _block, cell in ctx.window_cells(ee):
        for r in cell.reverts:
            key = (ee, r.original_sender.user)
            if key in balances:
                balances[key] = checked_amount(balances[key] + r.amount)
                ctx.reverts_applied.append(r.tx_id)
            else:
                ctx.losses.append(LossRecord(r.original_sender, r.amount, r.tx_id))
    return ctx


# -- transaction selection ----------------------------------------------------------

Policy = Callable[[Sequence[Tx], Sequence[ToCreditEvent], int], list]


def fifo_policy(pool: Sequence[Tx], pending: Sequence[ToCreditEvent], cap: int) -> list:
    """Alternate pending credits (oldest source block first) with pool arrivals."""
    out = []
    i = j = 0
    while len(out) < cap and (i < len(pending) or j < len(pool)):
        if i < len(pending):
            out.append(pending[i])
            i += 1
        if len(out) < cap and j < len(pool):
            out.append(pool[j])
            j += 1
    return out


def reverse_policy(pool: Sequence[Tx], pending: Sequence[ToCreditEvent], cap: int) -> list:
    return list(reversed(fifo_policy(pool, pending, cap)))


POLICIES: dict[str, Policy] = {"fifo": fifo_policy, "reverse": reverse_policy}


def pending_credits(ctx: BlockContext) -> list[ToCreditEvent]:
    out = []
    oc = ctx.work.outstanding_credits
    for key in sorted(oc, key=lambda k: (k[2], k)):
        out.extend(ev for ev in oc[key] if not ctx.env.hook.withholds(ev.tx_id))
    return out


def select_transactions(pool: Sequence[Tx], ctx: BlockContext, policy: Policy = fifo_policy) -> list[Tx]:
    chosen = policy(list(pool), pending_credits(ctx), ctx.params.max_block_txs)
    return [CreditTx(x, ctx.env.event_proof(x)) if isinstance(x, ToCreditEvent) else x for x in chosen]


# -- transaction application ----------------------------------------------------------


def _valid_amount(x) -> bool:
    return isinstance(x, int) and 0 < x <= MAX_AMOUNT


def _debit_failure(ctx: BlockContext, tx: DebitTx) -> str | None:
    if not verify_signature(tx, ctx.env.scheme):
        return "bad-signature"
    if tx.id in ctx.work.seen_tx_ids:
        return "duplicate-id"
    bal = ctx.work.user_balance.get((tx.sender.ee, tx.sender.user))
    if bal is None:
        return "no-account"
    if bal < tx.amount:
        return "insufficient-funds"
    if not ctx.env.hook.debit_ok(tx.id, ctx.slot):
        return "exec-failed"
    return None


def apply_debit(ctx: BlockContext, tx: DebitTx) -> Receipt | Skipped:
    p = ctx.params
    if (
        len(tx.id) != TXID_LEN
        or not tx.sender.in_bounds(p.shards, p.ees)
        or not tx.recipient.in_bounds(p.shards, p.ees)
        or not _valid_amount(tx.amount)
    ):
        return ctx.include(tx, Receipt(False, "invalid"))
    if tx.sender.shard != ctx.local:
        return Skipped("wrong-shard")
    work, x, ee = ctx.work, tx.amount, tx.sender.ee
    src_key = (ee, tx.sender.user)

    if tx.is_local:
        reason = _debit_failure(ctx, tx)
        if reason:
            return ctx.include(tx, Receipt(False, reason))
        work.user_balance[src_key] -= x
        dst_key = (tx.recipient.ee, tx.recipient.user)
        work.user_balance[dst_key] = checked_amount(work.user_balance.get(dst_key, 0) + x)
        work.seen_tx_ids[tx.id] = ctx.slot
        return ctx.include(tx, Receipt(True))

    dest = tx.recipient.pair
    if not ctx.solvent(ee, dest, x):
        return Skipped("ee-insufficient")
    reason = _debit_failure(ctx, tx)
    if reason:
        return ctx.include(tx, Receipt(False, reason))
    work.user_balance[src_key] -= x
    work.seen_tx_ids[tx.id] = ctx.slot
    ctx.scratch[(ee, *dest)] += x
    event = ToCreditEvent(tx.sender, tx.recipient, x, ctx.slot, len(ctx.events), tx.id)
    ctx.events.append(event)
    work.part_state[dest[0]][dest[1]] = work.part_state[dest[0]][dest[1]].with_credit(event)
    ctx.records_written += 1
    return ctx.include(tx, Receipt(True))


def apply_credit(ctx: BlockContext, tx: CreditTx) -> Receipt | Skipped:
    p = ctx.params
    ev = tx.event
    if (
        not ev.sender.in_bounds(p.shards, p.ees)
        or not ev.recipient.in_bounds(p.shards, p.ees)
        or not _valid_amount(ev.amount)
    ):
        return ctx.include(tx, Receipt(False, "invalid"))
    if ev.recipient.shard != ctx.local:
        return Skipped("wrong-shard")
    link = ctx.env.beacon.get_crosslink(ev.sender.shard, ev.block_number)
    if link is None:
        return Skipped("no-crosslink")
    if not verify(link.event_root, encode_event(ev), tx.proof):
        return Skipped("bad-proof")
    key = (ev.sender.shard, ev.sender.ee, ev.block_number)
    entry = ctx.work.outstanding_credits.get(key, ())
    if ev not in entry:
        return Skipped("not-outstanding")
    ee, src = ev.recipient.ee, ev.sender.pair
    if not ctx.solvent(ee, src, ev.amount):
        return Skipped("ee-insufficient")

    work = ctx.work
    rest = tuple(e for e in entry if e != ev)
    if rest:
        work.outstanding_credits[key] = rest
    else:
        del work.outstanding_credits[key]
    if ctx.env.hook.credit_ok(ev.tx_id, ctx.slot):
        dst_key = (ee, ev.recipient.user)
        work.user_balance[dst_key] = checked_amount(work.user_balance.get(dst_key, 0) + ev.amount)
        return ctx.include(tx, Receipt(True))
    work.part_state[src[0]][src[1]] = work.part_state[src[0]][src[1]].with_revert(RevertRecord.from_event(ev))
    ctx.scratch[(ee, *src)] += ev.amount
    ctx.records_written += 1
    return ctx.include(tx, Receipt(False, "exec-failed"))


def settle_ee_transfers(ctx: BlockContext, ee: int) -> BlockContext:
    """Apply the accumulated EE-level outflow of ``ee`` as netted transfers."""
    for key in sorted(k for k in ctx.scratch if k[0] == ee):
        amount = ctx.scratch.pop(key)
        if amount <= 0:
            continue
        _, ds, de = key
        ctx.work.part_state = netted_transfer(ctx.work.part_state, ctx.local, ee, (ds, de), amount)
        ctx.ee_transfers.append(EETransfer(ee, ds, de, amount))
    return ctx


# -- whole blocks ---------------------------------------------------------------------


def local_ee(tx: Tx, ees: int) -> int:
    """EE whose loop iteration handles ``tx``; -1 when the tx names no valid local EE."""
    if isinstance(tx, DebitTx):
        ee = tx.sender.ee
    elif isinstance(tx, CreditTx):
        ee = tx.event.recipient.ee
    else:
        raise StructuralError(f"not a transaction: {tx!r}")
    return ee if isinstance(ee, int) and 0 <= ee < ees else -1


def _apply(ctx: BlockContext, tx: Tx) -> Receipt | Skipped:
    if isinstance(tx, DebitTx):
        return apply_debit(ctx, tx)
    return apply_credit(ctx, tx)


def _run(ctx: BlockContext, candidates: Sequence[Tx]) -> list[tuple[Tx, Skipped]]:
    ees = ctx.params.ees
    buckets: dict[int, list[Tx]] = defaultdict(list)
    for tx in candidates:
        buckets[local_ee(tx, ees)].append(tx)
    for tx in buckets[-1]:
        ctx.include(tx, Receipt(False, "invalid"))
    skipped = []
    for ee in range(ees):
        for tx in buckets[ee]:
            res = _apply(ctx, tx)
            if isinstance(res, Skipped):
                skipped.append((tx, res))
        settle_ee_transfers(ctx, ee)
    return skipped


def _prepare(ctx: BlockContext) -> None:
    for ee in range(ctx.params.ees):
        preprocess_pending_credits(ctx, ee)
        process_reverts(ctx, ee)


def finalize(ctx: BlockContext) -> Proposal:
    parent = ctx.parent_root if ctx.parent_root is not None else commit_state(ctx.pre)
    block = Block(
        shard=ctx.local,
        slot=ctx.slot,
        parent_state_root=parent,
        txs=tuple(ctx.txs),
        receipts=tuple(ctx.receipts),
        events=tuple(ctx.events),
        event_root=commit_events(ctx.events),
        post_state_root=commit_state(ctx.work),
        ingested=ctx.ingested,
        expired=tuple(ctx.expired),
        reverts_applied=tuple(ctx.reverts_applied),
        losses=tuple(ctx.losses),
        ee_transfers=tuple(ctx.ee_transfers),
        bytes_fetched=sum(v.bytes_fetched for v in ctx.views.values()),
        records_written=ctx.records_written,
    )
    return Proposal(block, ctx.work, ctx.views)


def propose_block(
    pre: ShardState,
    views: Mapping[int, RemoteStateView],
    pool: Sequence[Tx],
    slot: int,
    env: ChainEnv,
    policy: Policy = fifo_policy,
    parent_root: bytes | None = None,
) -> Proposal:
    ctx = init_block(pre, views, slot, env)
    ctx.parent_root = parent_root
    _prepare(ctx)
    _run(ctx, select_transactions(pool, ctx, policy))
    return finalize(ctx)


def execute_block(
    pre: ShardState,
    views: Mapping[int, RemoteStateView],
    txs: Sequence[Tx],
    slot: int,
    env: ChainEnv,
    parent_root: bytes | None = None,
) -> tuple[Proposal, list[tuple[Tx, Skipped]]]:
    """Re-run a block over an explicit transaction list.

    Returns the resulting proposal and any transactions the honest rules
    would not have included.
    """
    ctx = init_block(pre, views, slot, env)
    ctx.parent_root = parent_root
    _prepare(ctx)
    skipped = _run(ctx, txs)
    return finalize(ctx), skipped
