"""Block validation by honest re-execution, and committee decisions.

Check ids:

1. remote part states proof-verified against crosslinks
2. outstandingCredits populated with the incoming credits
3. impending reverts credited to senders (or recorded as losses)
4. correct ToCredit events for successful debits, and no others
5. outgoing credit records written to the right cells
6. consumed outstanding credits removed on inclusion
7. a revert record placed for every failed or expired credit
8. EE-level netted amounts match the per-pair contributions
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .core import CreditTx, DebitTx, ShardState, StructuralError
from .merkle import commit_events, commit_state
from .proposer import Block, ChainEnv, RemoteStateView, check_views, execute_block

CHECKS = {
    1: "remote part states",
    2: "outstanding credits populated",
    3: "impending reverts processed",
    4: "ToCredit events emitted",
    5: "outgoing credit records",
    6: "consumed credits removed",
    7: "revert placed for failed credit",
    8: "EE-level transfer amounts",
}

DEFAULT_QUORUM = Fraction(2, 3)


@dataclass(frozen=True)
class Verdict:
    valid: bool
    violations: tuple[tuple[int, str], ...] = ()

    @property
    def check_ids(self) -> tuple[int, ...]:
        return tuple(sorted({c for c, _ in self.violations}))

    @property
    def first_check(self) -> int | None:
        return self.violations[0][0] if self.violations else None

    @classmethod
    def of(cls, violations: Iterable[tuple[int, str]]) -> "Verdict":
        vs = tuple(sorted(set(violations)))
        return cls(not vs, vs)


def validate_block(
    block: Block,
    pre_state: ShardState,
    views: Mapping[int, RemoteStateView],
    env: ChainEnv,
    post_state: ShardState | None = None,
    parent_root: bytes | None = None,
) -> Verdict:
    """Evaluate the eight checks against ``block``.

    ``post_state`` is the proposer's claimed post-state; when given, a root
    divergence is attributed to the specific component that differs.
    Without it only roots, receipts and events can be compared.
    """
    problems = check_views(views, pre_state, block.slot, env.beacon, env.params)
    if problems:
        return Verdict.of((1, p) for p in problems)

    v: list[tuple[int, str]] = []
    parent = parent_root if parent_root is not None else commit_state(pre_state)
    if block.shard != pre_state.shard_id or block.parent_state_root != parent:
        v.append((2, "block does not extend the attester's shard state"))
        return Verdict.of(v)
    try:
        honest, skipped = execute_block(pre_state, views, block.txs, block.slot, env, parent_root=parent)
    except StructuralError as exc:
        return Verdict.of([(8, f"re-execution failed: {exc}")])
    hb = honest.block

    for tx, skip in skipped:
        if isinstance(tx, CreditTx):
            check = 8 if skip.reason == "ee-insufficient" else 6
        else:
            check = 8 if skip.reason == "ee-insufficient" else 4
        v.append((check, f"tx {tx.id.hex()[:12]} not includable: {skip.reason}"))

    if skipped:
        pass  # already reported; receipts cannot be paired up
    elif block.txs != hb.txs or len(block.receipts) != len(block.txs):
        v.append((4, "transaction list does not match its own re-execution order"))
    else:
        for tx, got, want in zip(block.txs, block.receipts, hb.receipts):
            if got != want:
                check = 7 if isinstance(tx, CreditTx) else 4
                v.append((check, f"receipt for {tx.id.hex()[:12]}: {got} != {want}"))

    if block.events != hb.events or block.event_root != commit_events(block.events):
        v.append((4, "emitted ToCredit events differ"))
    if block.event_root != hb.event_root and block.events == hb.events:
        v.append((4, "event root does not commit to the events"))
    if block.ingested != hb.ingested:
        v.append((2, f"ingested {block.ingested} credits, expected {hb.ingested}"))
    if block.expired != hb.expired:
        v.append((7, "expired credit set differs"))
    if block.reverts_applied != hb.reverts_applied or block.losses != hb.losses:
        v.append((3, "applied reverts or losses differ"))
    if block.ee_transfers != hb.ee_transfers:
        v.append((8, "EE-level transfer list differs"))

    if block.post_state_root != hb.post_state_root:
        if post_state is None or commit_state(post_state) != block.post_state_root:
            v.append((8, "post-state root differs and no matching post-state supplied"))
        else:
            diff = _diff_states(block, post_state, honest.post_state, views, pre_state)
            v.extend(diff or [(8, "post-state root differs")])
    return Verdict.of(v)


def _diff_states(block: Block, claimed: ShardState, honest: ShardState, views, pre: ShardState):
    out: list[tuple[int, str]] = []
    local = pre.shard_id

    # 2 / 6: outstanding credits
    consumed = {tx.event for tx in block.txs if isinstance(tx, CreditTx)}
    for key in sorted(set(claimed.outstanding_credits) | set(honest.outstanding_credits)):
        a = set(claimed.outstanding_credits.get(key, ()))
        b = set(honest.outstanding_credits.get(key, ()))
        for ev in a ^ b:
            if ev in consumed and ev in a:
                out.append((6, f"consumed credit {ev.tx_id.hex()[:12]} still outstanding"))
            else:
                out.append((2, f"outstanding entry {key} differs at {ev.tx_id.hex()[:12]}"))

    # 5 / 7 / 8: part-state cells
    for r, (crow, hrow) in enumerate(zip(claimed.part_state, honest.part_state)):
        for c, (cc, hc) in enumerate(zip(crow, hrow)):
            if cc.credits != hc.credits:
                out.append((5, f"credit records in cell [{r}][{c}] differ"))
            if cc.reverts != hc.reverts:
                out.append((7, f"revert records in cell [{r}][{c}] differ"))
            if cc.balance != hc.balance:
                out.append((8, f"part-balance [{r}][{c}]: {cc.balance} != {hc.balance}"))

    # 3 / 4 / 6: user balances, attributed by who the user is in this block
    revert_users = set()
    for n, view in views.items():
        for snap in view.window():
            for cp in snap.cells:
                revert_users.update((cp.ee, rr.original_sender.user) for rr in cp.cell.reverts)
    for ee in range(pre.ees):
        for rr in pre.cell(local, ee).reverts:
            revert_users.add((ee, rr.original_sender.user))
    credit_users = {(tx.event.recipient.ee, tx.event.recipient.user) for tx in block.txs if isinstance(tx, CreditTx)}
    debit_users = {(tx.sender.ee, tx.sender.user) for tx in block.txs if isinstance(tx, DebitTx)}
    debit_users |= {(tx.recipient.ee, tx.recipient.user) for tx in block.txs if isinstance(tx, DebitTx) and tx.is_local}
    for key in sorted(set(claimed.user_balance) | set(honest.user_balance)):
        if claimed.user_balance.get(key) == honest.user_balance.get(key):
            continue
        if key in revert_users:
            check = 3
        elif key in credit_users:
            check = 6
        elif key in debit_users:
            check = 4
        else:
            check = 3
        out.append((check, f"user balance {key[0]}:{key[1].hex()[:8]} differs"))

    if claimed.seen_tx_ids != honest.seen_tx_ids:
        out.append((4, "debit id window differs"))
    if claimed.block_number != honest.block_number or claimed.shard_id != honest.shard_id:
        out.append((2, "state header differs"))
    return out


def committee_decide(verdicts: list[Verdict], quorum: Fraction = DEFAULT_QUORUM) -> str:
    if not verdicts:
        raise ValueError("committee is empty")
    valid = sum(1 for v in verdicts if v.valid)
    return "accepted" if Fraction(valid, len(verdicts)) >= quorum else "rejected"


def invert(verdict: Verdict) -> Verdict:
    """What a Byzantine attester reports: the opposite of the honest verdict."""
    if verdict.valid:
        return Verdict(False, ((1, "byzantine attester dissent"),))
    return Verdict(True, ())
