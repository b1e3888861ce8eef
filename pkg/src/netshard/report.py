"""Tabular and graphical summaries of a recorded trace.

``write_report`` emits ``slots.csv`` (one row per proposed block),
``outcomes.csv`` (one row per transfer) and three PNG figures next to them.
"""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .sim.trace import read_jsonl  # noqa: E402

SLOT_FIELDS = ("slot", "shard", "proposer", "decision", "txs", "events", "expired", "records_written", "bytes_fetched")
OUTCOME_FIELDS = ("tx", "class", "amount", "debit_slot", "credit_slot", "failed_slot", "revert_slot", "reason")


def slot_rows(records: list[dict]) -> list[dict]:
    decisions = {(r["shard"], r["slot"]): r["decision"] for r in records if r["type"] == "verdicts"}
    rows = []
    for r in records:
        if r["type"] != "block":
            continue
        rows.append({
            "slot": r["slot"],
            "shard": r["shard"],
            "proposer": r["proposer"],
            "decision": decisions.get((r["shard"], r["slot"]), ""),
            "txs": len(r["txs"]),
            "events": len(r["events"]),
            "expired": len(r["expired"]),
            "records_written": r["records_written"],
            "bytes_fetched": r["bytes_fetched"],
        })
    return rows


def outcome_rows(records: list[dict]) -> list[dict]:
    return [{k: r[k] for k in OUTCOME_FIELDS} for r in records if r["type"] == "outcome"]


def _write_csv(path: Path, fields, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)


def _per_shard(rows: list[dict], key: str) -> dict[int, tuple[list[int], list[int]]]:
    series = defaultdict(lambda: ([], []))
    for r in rows:
        xs, ys = series[r["shard"]]
        xs.append(r["slot"])
        ys.append(r[key])
    return dict(sorted(series.items()))


def _line_figure(rows: list[dict], key: str, ylabel: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for shard, (xs, ys) in _per_shard(rows, key).items():
        ax.plot(xs, ys, lw=1, label=f"shard {shard}")
    ax.set_xlabel("slot")
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False, fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _outcome_figure(rows: list[dict], path: Path) -> None:
    counts = Counter(r["class"] for r in rows)
    labels = sorted(counts)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(labels, [counts[x] for x in labels], color="0.4")
    ax.set_ylabel("transfers")
    ax.tick_params(axis="x", labelrotation=20)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(trace: str | Path, out_dir: str | Path) -> list[Path]:
    records = list(read_jsonl(trace))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    slots = slot_rows(records)
    outcomes = outcome_rows(records)
    paths = [out / "slots.csv", out / "outcomes.csv", out / "bytes_fetched.png", out / "txs_per_slot.png",
             out / "outcomes.png"]
    _write_csv(paths[0], SLOT_FIELDS, slots)
    _write_csv(paths[1], OUTCOME_FIELDS, outcomes)
    _line_figure(slots, "bytes_fetched", "bytes fetched", paths[2])
    _line_figure(slots, "txs", "included txs", paths[3])
    _outcome_figure(outcomes, paths[4])
    return paths
