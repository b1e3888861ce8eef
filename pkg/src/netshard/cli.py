"""Command line entry point.

Exit codes: 0 when the audit (or replay) passes, 1 on an audit failure,
2 on a structural or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .core import StructuralError
from .sim.generator import generate
from .sim.runner import EXIT_AUDIT, EXIT_OK, EXIT_STRUCTURAL, override, simulate, verify_trace
from .sim.scenario import ScenarioError, load_scenario
from .sim.trace import write_jsonl


def audit_path(trace: Path) -> Path:
    return trace.with_name(trace.stem + ".audit.json")


def cmd_simulate(args) -> int:
    config = override(load_scenario(args.scenario), args.slots, args.seed, args.literal_pair_gate)
    res = simulate(config, audit_every_slot=args.audit_every_slot)
    out = Path(args.out)
    write_jsonl(out, res.records)
    summary = res.report.to_json()
    audit_path(out).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    counts = " ".join(f"{k}={v}" for k, v in res.report.outcome_counts.items())
    print(f"{'PASS' if res.report.passed else 'FAIL'} slots={config.slots} {counts}")
    for check, fails in sorted(res.report.failures.items()):
        slot, detail = fails[0]
        print(f"  {check}: slot {slot}: {detail}")
    return res.exit_code


def cmd_verify(args) -> int:
    res = verify_trace(args.trace)
    if res.ok:
        print(f"PASS {res.blocks} blocks re-validated")
        return EXIT_OK
    print(f"FAIL {len(res.problems)} problem(s)")
    for p in res.problems[:20]:
        print(f"  {p}")
    return EXIT_AUDIT


def cmd_gen(args) -> int:
    doc = generate(
        args.seed,
        shards=args.shards,
        ees=args.ees,
        transfers=args.transfers,
        users=args.users,
        slots=args.slots,
        credit_fail_rate=args.credit_fail_rate,
        debit_fail_rate=args.debit_fail_rate,
        removals=args.removals,
        doomed=args.doomed,
    )
    text = json.dumps(doc, indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import write_report

    for p in write_report(args.trace, args.out_dir):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="netshard", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log rejected blocks and other events")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write a JSONL trace")
    p.add_argument("--scenario", required=True)
    p.add_argument("--slots", type=int, help="override the scenario's run length")
    p.add_argument("--seed", type=int, help="override the scenario's seed (u64)")
    p.add_argument("--out", required=True, help="trace path; the audit JSON is written next to it")
    p.add_argument("--audit-every-slot", action="store_true", help="add a per-slot audit record to the trace")
    p.add_argument("--literal-pair-gate", action="store_true", help="gate debits on the per-pair outflow only")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify-trace", help="re-run the attester over a recorded trace")
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen-scenario", help="emit a random scenario")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--shards", type=int, default=3)
    p.add_argument("--ees", type=int, default=2)
    p.add_argument("--transfers", type=int, default=1000)
    p.add_argument("--users", type=int, default=100)
    p.add_argument("--slots", type=int, default=200)
    p.add_argument("--credit-fail-rate", type=float, default=0.0)
    p.add_argument("--debit-fail-rate", type=float, default=0.0)
    p.add_argument("--removals", type=int, default=0)
    p.add_argument("--doomed", type=int, default=0, help="transfers whose refund is made to miss a removed sender")
    p.add_argument("--out", help="write here instead of stdout")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("report", help="write CSV tables and PNG figures for a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    for name in ("seed", "slots"):
        v = getattr(args, name, None)
        if v is not None and not 0 <= v < 2**64:
            print(f"error: --{name} must be a non-negative 64-bit integer", file=sys.stderr)
            return EXIT_STRUCTURAL
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STRUCTURAL
    except (StructuralError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_STRUCTURAL


if __name__ == "__main__":
    sys.exit(main())
