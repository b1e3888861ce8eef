"""Acceptance gate: one test class per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py``; the terminal summary ends with
one PASS/FAIL line per criterion.
"""

import time

import pytest

from netshard.core import PartStateCell, netted_transfer, real_balance, tx_id
from netshard.merkle import commit_state
from netshard.proposer import EETransfer, Receipt
from netshard.sim import load_scenario, parse_scenario, run, simulate
from netshard.sim.generator import generate
from netshard.sim.outcomes import COMPLETED, TERMINAL
from netshard.sim.runner import trace_bytes
from netshard.sim.scenario import BBP_BEHAVIORS, EXPECTED_CHECK

from .conftest import ep, scenario_path
from .oracle import reference_balances, simulated_balances


def column(values):
    return [[PartStateCell(v)] for v in values]


def blocks_of(records, shard=None, slot=None):
    return [r for r in records if r["type"] == "block"
            and (shard is None or r["shard"] == shard) and (slot is None or r["slot"] == slot)]


# criterion 7's workload, shared by 7 through 10
ATOMICITY = dict(shards=3, ees=2, users=100, transfers=1200, slots=220,
                 credit_fail_rate=0.05, debit_fail_rate=0.02, removals=5, doomed=5)
ATOMICITY_SEED = 7


@pytest.fixture(scope="module")
def atomicity_run():
    cfg = parse_scenario(generate(ATOMICITY_SEED, **ATOMICITY))
    start = time.perf_counter()
    res = simulate(cfg, audit_every_slot=True)
    return res, time.perf_counter() - start


@pytest.mark.criterion(1, "netted arithmetic fixture")
class TestCriterion1:
    def test_real_balance_and_transfer(self):
        start = time.perf_counter()
        s1, s2, s3 = column([10, 20, 30]), column([-5, 10, 20]), column([1, -2, 3])
        assert real_balance([s1, s2, s3], (0, 0)) == 6
        after = netted_transfer(s1, 0, 0, (1, 0), 5)
        assert [row[0].balance for row in after] == [5, 25, 30]
        assert time.perf_counter() - start < 0.1


@pytest.mark.criterion(2, "happy case: debits, outstanding credits, completion")
class TestCriterion2:
    def test_happy_case(self):
        start = time.perf_counter()
        res = simulate(load_scenario(scenario_path("happy")))
        w, records = res.world, res.records
        k = 1
        (b1,) = blocks_of(records, 0, k)
        assert [t["kind"] for t in b1["txs"]] == ["debit"] * 3
        assert b1["ee_transfers"] == [[0, 1, 1, 60]]
        (b2,) = blocks_of(records, 1, k + 1)
        assert b2["ingested"] == 3
        assert [t["kind"] for t in b2["txs"]] == ["credit"] * 3 and all(r["success"] for r in b2["receipts"])
        for label, amount in (("t1", 10), ("t2", 20), ("t3", 30)):
            o = w.tracker.outcomes[tx_id(label)]
            assert o.cls == "COMPLETED" and o.debit_slot == k
            assert k + 1 <= o.credit_slot <= k + w.params.time_out
        users = {**{(0, f"a{i}"): 100 - 10 * i for i in (1, 2, 3)}, **{(1, f"b{i}"): 50 + 10 * i for i in (1, 2, 3)}}
        for (s, label), bal in users.items():
            assert w.states[s].user_balance[(s, ep(s, s, label).user)] == bal
        # E0 on s0 lost 60 of real balance to E1 on s1
        assert sum(st.part_state[0][0].balance for st in w.states) == 240
        assert sum(st.part_state[1][1].balance for st in w.states) == 210
        assert res.report.passed and res.report.outcome_counts == {"COMPLETED": 3}
        assert time.perf_counter() - start < 1.0

    def test_outstanding_credits_at_next_slot(self):
        from .helpers import fresh_context, load_doc, world_from

        w = world_from(load_doc("happy"))
        w.run(1)
        ctx = fresh_context(w, 1)
        assert len(ctx.work.outstanding_credits[(0, 0, 1)]) == 3


@pytest.mark.criterion(3, "debit failure: failure receipt, zero state delta")
class TestCriterion3:
    def test_debit_failure(self):
        pre_roots = {}

        def observer(world, shard, slot, pre, views, prop, decision, parent_root):
            if shard == 0 and slot == 1:
                pre_roots["pre"] = pre.clone()
                pre_roots["prop"] = prop

        res = simulate(load_scenario(scenario_path("debit-fail")), observer=observer)
        pre, prop = pre_roots["pre"], pre_roots["prop"]
        assert prop.block.receipts == (Receipt(False, "exec-failed"),)
        assert prop.block.events == () and prop.block.ee_transfers == ()
        bumped = pre.clone()
        bumped.block_number = 1
        assert commit_state(bumped) == prop.block.post_state_root
        assert prop.post_state == bumped
        assert res.world.tracker.outcomes[tx_id("t1")].cls == "DEBIT-FAILED"


@pytest.mark.criterion(4, "credit failure: EE revert same block, user revert next block")
class TestCriterion4:
    def test_credit_failure(self):
        res = simulate(load_scenario(scenario_path("credit-fail")))
        w, records = res.world, res.records
        (fail_block,) = blocks_of(records, 1, 2)
        t3 = tx_id("t3").hex()
        idx = [i for i, t in enumerate(fail_block["txs"]) if t["event"]["tx"] == t3][0]
        assert fail_block["receipts"][idx] == {"success": False, "reason": "exec-failed"}
        assert [1, 0, 0, 30] in fail_block["ee_transfers"]
        (refund,) = blocks_of(records, 0, 3)
        assert refund["reverts_applied"] == [t3]
        o = w.tracker.outcomes[tx_id("t3")]
        assert (o.cls, o.failed_slot, o.revert_slot) == ("REVERTED", 2, 3)
        assert w.states[0].user_balance[(0, ep(0, 0, "a3").user)] == 100
        assert w.states[1].user_balance[(1, ep(1, 1, "b3").user)] == 50
        # net zero for the reverted transfer: only the 30 units of t1 and t2 moved
        assert sum(st.part_state[0][0].balance for st in w.states) == 300 - 30
        assert sum(st.part_state[1][1].balance for st in w.states) == 150 + 30
        assert res.report.passed


@pytest.mark.criterion(5, "expiry exactly at k' + timeOut == k, then reverted")
class TestCriterion5:
    def test_expiry(self):
        res = simulate(load_scenario(scenario_path("expiry")))
        w, records = res.world, res.records
        to = w.params.time_out
        t3 = tx_id("t3")
        k_prime = w.tracker.outcomes[t3].debit_slot
        expired_at = [b["slot"] for b in blocks_of(records, 1) if t3.hex() in b["expired"]]
        assert expired_at == [k_prime + to]
        (exp_block,) = blocks_of(records, 1, k_prime + to)
        assert exp_block["ee_transfers"] == [[1, 0, 0, 30]]
        o = w.tracker.outcomes[t3]
        assert (o.cls, o.failed_slot, o.revert_slot) == ("REVERTED", k_prime + to, k_prime + to + 1)
        assert w.states[0].user_balance[(0, ep(0, 0, "a3").user)] == 100
        assert res.report.passed

    def test_entry_outstanding_until_expiry(self):
        from .helpers import world_from, load_doc

        w = world_from(load_doc("expiry"))
        held = []
        for t in range(1, 6):
            w.step()
            held.append(any(e.tx_id == tx_id("t3") for v in w.states[1].outstanding_credits.values() for e in v))
        assert held == [False, True, True, True, False]


@pytest.mark.criterion(6, "Byzantine matrix 8/8, no false positives on 10^4 honest blocks")
class TestCriterion6:
    def test_matrix(self):
        start = time.perf_counter()
        doc = load_doc_json("byzantine-matrix")
        res = simulate(parse_scenario(doc))
        byz = {r.proposer.partition(":")[2]: r for r in res.world.slot_records if r.proposer != "honest"}
        assert sorted(byz) == sorted(BBP_BEHAVIORS)
        for behavior, r in byz.items():
            assert r.decision == "rejected" and r.verdict.first_check == EXPECTED_CHECK[behavior], behavior
        # rejected blocks leave shard state untouched: the next accepted parent is the old root
        targets = {(i["shard"], i["slot"]) for i in doc["injections"] if i["kind"] == "byzantine-bp"}
        for shard, slot in targets:
            assert slot not in res.world.accepted_slots[shard]
            assert slot in res.world.rejected_slots[shard]

        cfg = parse_scenario(generate(99, shards=3, ees=2, transfers=8000, slots=3334,
                                      credit_fail_rate=0.05, debit_fail_rate=0.02))
        honest = simulate(cfg)
        blocks = honest.world.slot_records
        assert len(blocks) >= 10_000
        assert all(r.verdict.valid and r.decision == "accepted" for r in blocks)
        assert time.perf_counter() - start < 30

    def test_state_unchanged_on_rejection(self):
        doc = load_doc_json("byzantine-matrix")
        from netshard.sim.world import World

        w = World(parse_scenario(doc))
        targets = {(i["shard"], i["slot"]) for i in doc["injections"] if i["kind"] == "byzantine-bp"}
        for t in range(1, doc["slots"] + 1):
            before = [(w.roots[s], w.states[s]) for s in range(w.params.shards)]
            w.step()
            for s in range(w.params.shards):
                if (s, t) in targets:
                    assert w.roots[s] == before[s][0] and w.states[s] is before[s][1]


@pytest.mark.criterion(7, "atomicity suite: terminal classes, conservation, reconciliation")
class TestCriterion7:
    def test_atomicity(self, atomicity_run):
        res, elapsed = atomicity_run
        w, rep = res.world, res.report
        cfg = w.config
        assert len(cfg.transfers) >= 1000 and cfg.slots >= 200
        assert (cfg.shards, cfg.ees, len(cfg.genesis_users)) == (3, 2, 100)
        to = w.params.time_out
        for o in w.tracker.outcomes.values():
            assert o.cls in TERMINAL
            if o.debit_slot is not None:
                assert o.terminal_slot() - o.debit_slot <= to + 2, o
        assert not any(w.rejected_slots)
        audits = [r for r in res.records if r["type"] == "audit"]
        assert len(audits) == cfg.slots and all(a["conservation"] for a in audits)
        assert not w.conservation_failures and not w.reconciliation_failures
        assert rep.quiescent_at_end and w.quiescent_slots[-1] == w.slot
        assert rep.outcome_counts.get("LOST", 0) > 0 and len(w.losses) == rep.outcome_counts["LOST"]
        assert rep.outcome_counts.get("REVERTED", 0) > 0 and rep.outcome_counts.get("DEBIT-FAILED", 0) > 0
        assert rep.negative_part_balance_seen
        assert rep.passed
        assert elapsed < 60


@pytest.mark.criterion(8, "oracle equivalence at quiescence")
class TestCriterion8:
    def test_oracle(self, atomicity_run):
        res, _ = atomicity_run
        w = res.world
        assert simulated_balances(w) == reference_balances(w.config, w.tracker.ordered())

    def test_completed_set_alone(self, atomicity_run):
        # no refund here lands on a recreated account, so COMPLETED alone suffices
        res, _ = atomicity_run
        w = res.world
        completed = [o for o in w.tracker.ordered() if o.cls == COMPLETED]
        assert simulated_balances(w) == reference_balances(w.config, completed)


@pytest.mark.criterion(9, "transience bound and bytesFetched bound")
class TestCriterion9:
    def test_transience_and_bytes(self, atomicity_run):
        res, _ = atomicity_run
        blocks = res.world.slot_records
        assert blocks
        for r in blocks:
            assert r.records_written <= r.txs, (r.shard, r.slot)
            assert r.bytes_fetched <= r.bytes_bound, (r.shard, r.slot)
        assert res.report.literal_transience_violations == 0


@pytest.mark.criterion(10, "determinism: byte-identical traces")
class TestCriterion10:
    def test_rerun(self, atomicity_run):
        res, _ = atomicity_run
        again = simulate(parse_scenario(generate(ATOMICITY_SEED, **ATOMICITY)), audit_every_slot=True)
        assert trace_bytes(res.records) == trace_bytes(again.records)

    def test_scenario_file_rerun(self):
        cfg = load_scenario(scenario_path("byzantine-matrix"))
        assert trace_bytes(run(cfg)[0]) == trace_bytes(run(cfg)[0])


def load_doc_json(name):
    from .helpers import load_doc

    return load_doc(name)
