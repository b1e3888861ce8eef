"""Single-ledger reference model for end-of-run user balances.

It knows nothing about shards, EEs or netting: each COMPLETED transfer moves
its amount from sender to recipient atomically, every other class is a no-op,
and account removals delete the key at the start of their slot.

One refinement keeps the model exact when an account is removed and later
recreated by an incoming credit: a REVERTED transfer is applied as a debit at
its debit slot and a refund at its revert slot.  Without a removal in between
the two cancel, which is the plain no-op.

Within a slot, removals come first and credits precede debits.  Sums do not
depend on the order, but a debit from an account recreated by a credit in the
same slot must find its key.
"""

from collections import defaultdict


def reference_balances(config, outcomes) -> dict:
    ledger = {}
    for e, b in config.genesis_users:
        ledger[e] = b
    events = defaultdict(list)
    for inj in config.injections:
        if inj.kind == "remove-account":
            events[inj.slot].append((0, "remove", inj.endpoint, 0))
    for o in outcomes:
        if o.cls == "COMPLETED":
            events[o.debit_slot].append((2, "debit", o.sender, o.amount))
            events[o.credit_slot].append((1, "credit", o.recipient, o.amount))
        elif o.cls == "REVERTED":
            events[o.debit_slot].append((2, "debit", o.sender, o.amount))
            events[o.revert_slot].append((1, "credit", o.sender, o.amount))
    for slot in sorted(events):
        for _, op, who, x in sorted(events[slot], key=lambda e: e[0]):
            if op == "remove":
                ledger.pop(who, None)
            elif op == "debit":
                ledger[who] -= x
            else:
                ledger[who] = ledger.get(who, 0) + x
    return ledger


def simulated_balances(world) -> dict:
    from netshard.core import Endpoint

    out = {}
    for s, st in enumerate(world.states):
        for (ee, user), bal in st.user_balance.items():
            out[Endpoint(s, ee, user)] = bal
    return out
