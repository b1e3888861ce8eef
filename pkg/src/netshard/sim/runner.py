"""Whole runs: simulate a scenario, and replay a recorded trace."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from ..attester import validate_block
from .audit import AuditReport, audit
from .scenario import ScenarioConfig, parse_scenario
from .trace import block_from, dumps, read_jsonl, views_digest
from .world import World

EXIT_OK = 0
EXIT_AUDIT = 1
EXIT_STRUCTURAL = 2


@dataclass
class RunResult:
    records: list[dict]
    report: AuditReport
    world: World

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.report.passed else EXIT_AUDIT


def simulate(config: ScenarioConfig, audit_every_slot: bool = False, observer=None) -> RunResult:
    world = World(config, observer=observer, audit_every_slot=audit_every_slot)
    world.run()
    report = audit(world)
    records = list(world.records)
    records.extend(o.to_json() for o in world.tracker.ordered())
    records.append(report.to_json())
    return RunResult(records, report, world)


def run(config: ScenarioConfig, audit_every_slot: bool = False) -> tuple[list[dict], AuditReport, int]:
    res = simulate(config, audit_every_slot)
    return res.records, res.report, res.exit_code


def override(config: ScenarioConfig, slots=None, seed=None, literal_pair_gate=None) -> ScenarioConfig:
    changes = {}
    if slots is not None:
        changes["slots"] = slots
    if seed is not None:
        changes["seed"] = seed
    if literal_pair_gate:
        changes["literal_pair_gate"] = True
    return replace(config, **changes)


def trace_bytes(records: list[dict]) -> bytes:
    return "".join(dumps(r) + "\n" for r in records).encode()


@dataclass
class VerifyResult:
    blocks: int
    problems: list[str]

    @property
    def ok(self) -> bool:
        return not self.problems


def verify_trace(path: str | Path) -> VerifyResult:
    """Re-derive every recorded block's inputs and re-run an honest attester.

    The scenario in the header is simulated again; for each block the
    recorded views digest must match what the proposer showed, and the
    recorded committee decision must agree with a fresh honest verdict on
    the recorded block.  Finally the regenerated trace must equal the file.
    """
    records = list(read_jsonl(path))
    if not records or records[0].get("type") != "header":
        raise ValueError("trace does not start with a header record")
    config = parse_scenario(records[0]["scenario"])
    blocks = {(r["shard"], r["slot"]): r for r in records if r["type"] == "block"}
    decisions = {(r["shard"], r["slot"]): r["decision"] for r in records if r["type"] == "verdicts"}
    problems: list[str] = []
    checked = 0
    audit_every_slot = any(r["type"] == "audit" for r in records)

    def observer(world, shard, slot, pre, _honest_views, prop, _decision, parent_root):
        nonlocal checked
        rec = blocks.get((shard, slot))
        if rec is None:
            problems.append(f"shard {shard} slot {slot}: block missing from trace")
            return
        if views_digest(prop.views) != rec["views_digest"]:
            problems.append(f"shard {shard} slot {slot}: views differ from the recorded ones")
            return
        block = block_from(rec)
        verdict = validate_block(block, pre, prop.views, world.env, parent_root=parent_root)
        honest = "accepted" if verdict.valid else "rejected"
        recorded = decisions.get((shard, slot))
        byzantine_attesters = _byzantine_count(config, shard)
        # with Byzantine attesters the committee may legitimately differ from one honest vote
        if recorded != honest and not byzantine_attesters:
            problems.append(f"shard {shard} slot {slot}: recorded {recorded}, honest attester says {honest}")
        checked += 1

    world = World(config, observer=observer, audit_every_slot=audit_every_slot)
    world.run()
    report = audit(world)
    regenerated = list(world.records)
    regenerated.extend(o.to_json() for o in world.tracker.ordered())
    regenerated.append(report.to_json())
    if len(regenerated) != len(records):
        problems.append(f"trace has {len(records)} records, replay produced {len(regenerated)}")
    for i, (a, b) in enumerate(zip(records, regenerated)):
        if a != b:
            problems.append(f"record {i} ({a.get('type')}) differs from replay")
            break
    return VerifyResult(checked, problems)


def _byzantine_count(config: ScenarioConfig, shard: int) -> int:
    return sum(1 for i in config.injections if i.kind == "byzantine-attester" and i.shard == shard)
