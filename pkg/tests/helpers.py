"""Small builders shared by the proposer, attester and sim tests."""

import json

from netshard.core import DebitTx, tx_id
from netshard.proposer import _prepare, init_block
from netshard.signing import sign_debit
from netshard.sim import parse_scenario
from netshard.sim.world import World

from .conftest import ep, scenario_path


def load_doc(name: str) -> dict:
    return json.loads(scenario_path(name).read_text())


def world_from(doc: dict, **changes) -> World:
    return World(parse_scenario({**doc, **changes}))


def fresh_context(world: World, shard: int, prepare: bool = True):
    """Context for the next slot on ``shard``, built from the world's live views."""
    t = world.slot + 1
    views = world.build_views(shard, t)
    ctx = init_block(world.states[shard], views, t, world.env)
    if prepare:
        _prepare(ctx)
    return ctx


def debit(label, sender, recipient, amount, signer=None) -> DebitTx:
    tx = DebitTx(tx_id(label), ep(*sender), ep(*recipient), amount)
    return sign_debit(tx, signer=signer)


def three_shard_doc(users, part_balances=None, **extra) -> dict:
    genesis = {"users": users}
    if part_balances is not None:
        genesis["part_balances"] = part_balances
    return {"shards": 3, "ees": 1, "genesis": genesis, **extra}
