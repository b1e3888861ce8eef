"""Byzantine block proposer deviations.

Each behaviour takes the honest proposal for a slot and returns a deviant one
that is still internally consistent: roots are recomputed over the tampered
content, so only re-execution or proof checking can expose it.  When the slot
offers nothing to omit, the behaviour falls back to the "false data" variant
(a fabricated record) so every injection really deviates.
"""

from __future__ import annotations

from dataclasses import replace

from ..core import Endpoint, PartStateCell, RevertRecord, ToCreditEvent, tx_id
from ..merkle import commit_events, commit_state
from ..proposer import ChainEnv, Proposal

_FAKE_USER = b"\xbb" * 20


def _fake_event(local: int, src: int, slot: int) -> ToCreditEvent:
    return ToCreditEvent(
        Endpoint(src, 0, _FAKE_USER), Endpoint(local, 0, _FAKE_USER), 1, max(slot - 1, 0), 0, tx_id("byzantine")
    )


def _remote(proposal: Proposal) -> int:
    return min(proposal.views)


def _tamper_view(proposal: Proposal, edit) -> Proposal:
    n = _remote(proposal)
    view = proposal.views[n]
    snap = view.latest
    cp = snap.cells[0]
    cells = (replace(cp, cell=edit(cp.cell)),) + snap.cells[1:]
    view = replace(view, snapshots=view.snapshots[:-1] + (replace(snap, cells=cells),))
    return replace(proposal, views={**proposal.views, n: view})


def false_part_balances(p: Proposal, env: ChainEnv) -> Proposal:
    return _tamper_view(p, lambda c: replace(c, balance=c.balance + 1_000_000))


def false_credits(p: Proposal, env: ChainEnv) -> Proposal:
    def edit(c: PartStateCell) -> PartStateCell:
        if c.credits:
            return replace(c, credits=c.credits[1:])
        return c.with_credit(_fake_event(p.block.shard, _remote(p), p.block.slot))

    return _tamper_view(p, edit)


def false_reverts(p: Proposal, env: ChainEnv) -> Proposal:
    def edit(c: PartStateCell) -> PartStateCell:
        if c.reverts:
            return replace(c, reverts=c.reverts[1:])
        ev = _fake_event(p.block.shard, _remote(p), p.block.slot)
        return c.with_revert(RevertRecord(ev.recipient, 1, ev.sender, ev.tx_id))

    return _tamper_view(p, edit)


def _repack(p: Proposal, post=None, **block_changes) -> Proposal:
    post = post if post is not None else p.post_state
    block = replace(p.block, post_state_root=commit_state(post), **block_changes)
    return replace(p, block=block, post_state=post)


def skip_outstanding_update(p: Proposal, env: ChainEnv) -> Proposal:
    post = p.post_state.clone()
    fresh = [k for k in post.outstanding_credits if k[2] == p.block.slot - 1]
    if fresh:
        dropped = sum(len(post.outstanding_credits.pop(k)) for k in fresh)
        return _repack(p, post, ingested=max(p.block.ingested - dropped, 0))
    ev = _fake_event(p.block.shard, _remote(p), p.block.slot)
    key = (ev.sender.shard, ev.sender.ee, ev.block_number)
    post.outstanding_credits[key] = post.outstanding_credits.get(key, ()) + (ev,)
    return _repack(p, post)


def skip_revert_processing(p: Proposal, env: ChainEnv) -> Proposal:
    post = p.post_state.clone()
    undone = False
    for n, view in sorted(p.views.items()):
        for snap in view.window():
            for cp in snap.cells:
                for r in cp.cell.reverts:
                    key = (cp.ee, r.original_sender.user)
                    if r.tx_id in p.block.reverts_applied and key in post.user_balance:
                        post.user_balance[key] -= r.amount
                        undone = True
    if undone:
        return _repack(p, post, reverts_applied=())
    involved = set()
    for tx in p.block.txs:
        ev = getattr(tx, "event", None)
        if ev is not None:
            involved.add((ev.recipient.ee, ev.recipient.user))
        else:
            involved.update({(tx.sender.ee, tx.sender.user), (tx.recipient.ee, tx.recipient.user)})
    bystanders = sorted(k for k in post.user_balance if k not in involved)
    if bystanders:
        post.user_balance[bystanders[0]] += 1
    else:
        post.user_balance[(0, _FAKE_USER)] = 1
    return _repack(p, post)


def wrong_event(p: Proposal, env: ChainEnv) -> Proposal:
    events = list(p.block.events)
    if events:
        events[0] = replace(events[0], amount=events[0].amount + 1)
    else:
        fake = _fake_event(_remote(p), p.block.shard, p.block.slot)
        events.append(replace(fake, block_number=p.block.slot))
    events = tuple(events)
    block = replace(p.block, events=events, event_root=commit_events(events))
    return replace(p, block=block)


def missing_revert(p: Proposal, env: ChainEnv) -> Proposal:
    post = p.post_state.clone()
    for r, row in enumerate(post.part_state):
        for c, cell in enumerate(row):
            if cell.reverts:
                row[c] = replace(cell, reverts=cell.reverts[1:])
                return _repack(p, post)
    ev = _fake_event(p.block.shard, _remote(p), p.block.slot)
    s, e = _remote(p), 0
    post.part_state[s][e] = post.part_state[s][e].with_revert(RevertRecord(ev.sender, 1, ev.recipient, ev.tx_id))
    return _repack(p, post)


def wrong_ee_transfer(p: Proposal, env: ChainEnv) -> Proposal:
    post = p.post_state.clone()
    local, other = p.block.shard, _remote(p)
    post.part_state[local][0] = post.part_state[local][0].shifted(-1)
    post.part_state[other][0] = post.part_state[other][0].shifted(1)
    return _repack(p, post)


BEHAVIORS = {
    "false-part-balances": false_part_balances,
    "false-credits": false_credits,
    "false-reverts": false_reverts,
    "skip-outstanding-update": skip_outstanding_update,
    "skip-revert-processing": skip_revert_processing,
    "wrong-event": wrong_event,
    "missing-revert": missing_revert,
    "wrong-ee-transfer": wrong_ee_transfer,
}


def byzantine_proposal(behavior: str, honest: Proposal, env: ChainEnv) -> Proposal:
    return BEHAVIORS[behavior](honest, env)
