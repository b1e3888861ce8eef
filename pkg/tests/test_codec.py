import pytest

from netshard.codec import (
    CELL_LEAF_FIXED_SIZE,
    EVENT_SIZE,
    REVERT_SIZE,
    decode_cell,
    decode_event,
    decode_state,
    encode_cell,
    encode_event,
    encode_revert,
    encode_state,
    i128,
    u128,
)
from netshard.core import AmountOverflow, PartStateCell, RevertRecord, ShardState, StructuralError, ToCreditEvent, tx_id
from netshard.merkle import commit_state, prove_cell, state_tree, verify_cell

from .conftest import ep, matrix


def sample_state() -> ShardState:
    ev = ToCreditEvent(ep(0, 1, "a"), ep(1, 0, "b"), 30, 4, 0, tx_id("t"))
    rr = RevertRecord(ep(1, 1, "c"), 7, ep(0, 0, "d"), tx_id("r"))
    m = matrix([[10, -5], [1, 0]])
    m[1][0] = m[1][0].with_credit(ev)
    m[1][1] = m[1][1].with_revert(rr)
    return ShardState(
        shard_id=0,
        block_number=4,
        part_state=m,
        outstanding_credits={(1, 0, 3): (ToCreditEvent(ep(1, 0, "x"), ep(0, 1, "y"), 2, 3, 0, tx_id("o")),)},
        user_balance={(0, ep(0, 0, "a").user): 100, (1, ep(0, 1, "a").user): 3},
        seen_tx_ids={tx_id("t"): 4},
    )


class TestPrimitives:
    def test_widths(self):
        assert len(u128(1)) == 16
        assert i128(-1) == b"\xff" * 16
        with pytest.raises(AmountOverflow):
            u128(-1)

    def test_fixed_sizes(self):
        ev = ToCreditEvent(ep(0, 0, "a"), ep(1, 0, "b"), 1, 2, 3, tx_id("t"))
        assert len(encode_event(ev)) == EVENT_SIZE
        assert len(encode_revert(RevertRecord.from_event(ev))) == REVERT_SIZE
        assert len(encode_cell(PartStateCell(5))) + 9 == CELL_LEAF_FIXED_SIZE

    def test_event_round_trip(self):
        ev = ToCreditEvent(ep(2, 1, "a"), ep(0, 3, "b"), 99, 12, 4, tx_id("t"))
        assert decode_event(encode_event(ev)) == ev

    def test_cell_round_trip(self):
        cell = sample_state().cell(1, 0)
        assert decode_cell(encode_cell(cell)) == cell

    def test_trailing_bytes_rejected(self):
        with pytest.raises(StructuralError):
            decode_cell(encode_cell(PartStateCell(1)) + b"\x00")

    def test_bad_txid_length(self):
        ev = ToCreditEvent(ep(0, 0, "a"), ep(1, 0, "b"), 1, 2, 3, b"short")
        with pytest.raises(StructuralError):
            encode_event(ev)


class TestStateCommitment:
    def test_round_trip_keeps_root(self):
        s = sample_state()
        back = decode_state(encode_state(s))
        assert back == s
        assert commit_state(back) == commit_state(s)

    def test_one_part_balance_changes_root(self):
        s = sample_state()
        t = s.clone()
        t.part_state[0][1] = t.part_state[0][1].shifted(1)
        assert commit_state(s) != commit_state(t)

    def test_every_component_is_committed(self):
        s = sample_state()
        base = commit_state(s)
        edits = [
            lambda t: t.outstanding_credits.clear(),
            lambda t: t.user_balance.update({(0, ep(0, 0, "a").user): 101}),
            lambda t: t.seen_tx_ids.clear(),
            lambda t: setattr(t, "block_number", 5),
        ]
        for edit in edits:
            t = s.clone()
            edit(t)
            assert commit_state(t) != base

    def test_cell_proof_verifies(self):
        s = sample_state()
        tree = state_tree(s)
        for r in range(2):
            for c in range(2):
                p = prove_cell(tree, r, c, 2)
                assert verify_cell(tree.root, r, c, 2, s.cell(r, c), p)

    def test_cell_proof_pinned_to_position(self):
        s = sample_state()
        tree = state_tree(s)
        p = prove_cell(tree, 1, 0, 2)
        assert not verify_cell(tree.root, 0, 1, 2, s.cell(1, 0), p)
        assert not verify_cell(tree.root, 1, 0, 2, s.cell(1, 0).shifted(1), p)
