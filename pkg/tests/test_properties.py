import random

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from netshard.sim import parse_scenario, simulate
from netshard.sim.generator import generate
from netshard.sim.scenario import BBP_BEHAVIORS

from .oracle import reference_balances, simulated_balances

SLOW = settings(max_examples=12, deadline=None, suppress_health_check=[HealthCheck.too_slow])


class TestRandomWorlds:
    @SLOW
    @given(seed=st.integers(0, 2**32), shards=st.integers(1, 4), ees=st.integers(1, 3),
           credit=st.sampled_from([0.0, 0.1, 0.3]), debit=st.sampled_from([0.0, 0.05]))
    def test_audit_and_reference(self, seed, shards, ees, credit, debit):
        doc = generate(seed, shards=shards, ees=ees, transfers=120, users=24, slots=40,
                       credit_fail_rate=credit, debit_fail_rate=debit, removals=2, doomed=2)
        res = simulate(parse_scenario(doc))
        assert res.report.passed, res.report.failures
        assert simulated_balances(res.world) == reference_balances(res.world.config, res.world.tracker.ordered())

    @SLOW
    @given(seed=st.integers(0, 2**32), time_out=st.integers(1, 6), cap=st.integers(1, 8))
    def test_tight_blocks_and_short_timeouts(self, seed, time_out, cap):
        # small blocks force credits to wait and some to expire
        doc = generate(seed, shards=3, ees=2, transfers=150, users=30, slots=60, time_out=time_out,
                       max_block_txs=cap, credit_fail_rate=0.05)
        doc["slots"] += 300  # let the backlog drain before comparing
        res = simulate(parse_scenario(doc))
        assert res.report.passed, res.report.failures
        assert simulated_balances(res.world) == reference_balances(res.world.config, res.world.tracker.ordered())

    @SLOW
    @given(seed=st.integers(0, 2**32))
    def test_rejected_blocks_lose_nothing(self, seed):
        rng = random.Random(seed)
        doc = generate(seed, shards=3, ees=2, transfers=150, users=30, slots=60, credit_fail_rate=0.05)
        picks = rng.sample([(s, t) for s in range(3) for t in range(2, 45)], 12)
        doc["injections"] += [
            {"kind": "byzantine-bp", "behavior": rng.choice(BBP_BEHAVIORS), "shard": s, "slot": t} for s, t in picks
        ]
        res = simulate(parse_scenario(doc))
        assert res.report.passed, res.report.failures
        assert sum(len(r) for r in res.world.rejected_slots) == 12
        assert simulated_balances(res.world) == reference_balances(res.world.config, res.world.tracker.ordered())
