"""Flat-file formats for transaction logs, rank snapshots and ground truth.

Transactions: CSV with the fixed header ``day,rater,ratee,category,value,rating``.
Ranks: JSON ``{"period_end_day": d, "ranks": {"<agent>": rank, ...}}``; a list
of such objects stores a whole rank history.
Ground truth: JSON ``{"<agent>": {"honest", "R_ea", "role", "categories"}}``.

Floats are written with ``repr`` so files round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from collections.abc import Iterable, Mapping
from pathlib import Path

from .engine import AgentId, RankState, Transaction
from .market import AgentProfile

TRANSACTION_COLUMNS = ("day", "rater", "ratee", "category", "value", "rating")


def write_transactions(transactions: Iterable[Transaction], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRANSACTION_COLUMNS)
        for t in transactions:
            w.writerow((t.day, t.rater, t.ratee, t.category, repr(t.value), repr(t.rating)))


def read_transactions(path: str | Path) -> list[Transaction]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != TRANSACTION_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(TRANSACTION_COLUMNS)}, got {header}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                day, rater, ratee, cat, value, rating = row
                out.append(Transaction(rater=int(rater), ratee=int(ratee), category=int(cat),
                                       value=float(value), rating=float(rating), day=int(day)))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
        return out


def rank_state_to_dict(state: RankState) -> dict:
    return {"period_end_day": state.period_end_day,
            "ranks": {str(a): r for a, r in sorted(state.ranks.items())}}


def rank_state_from_dict(data: Mapping) -> RankState:
    return RankState(ranks={int(a): float(r) for a, r in data["ranks"].items()},
                     period_end_day=int(data["period_end_day"]))


def write_ranks(states: RankState | list[RankState], path: str | Path) -> None:
    if isinstance(states, RankState):
        payload = rank_state_to_dict(states)
    else:
        payload = [rank_state_to_dict(s) for s in states]
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def read_ranks(path: str | Path) -> list[RankState]:
    """Read a snapshot or a history; always returns a list."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = [data]
    return [rank_state_from_dict(d) for d in data]


def write_ground_truth(profiles: Mapping[AgentId, AgentProfile], path: str | Path) -> None:
    payload = {
        str(p.id): {"honest": p.honest, "R_ea": p.expected_goodness, "role": p.role,
                    "categories": list(p.categories)}
        for p in sorted(profiles.values(), key=lambda p: p.id)
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def read_ground_truth(path: str | Path) -> dict[AgentId, AgentProfile]:
    """Rebuild minimal profiles (identity, role, honesty, goodness, categories)."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    profiles = {}
    for key, rec in data.items():
        a = int(key)
        profiles[a] = AgentProfile(id=a, role=rec["role"], honest=bool(rec["honest"]),
                                   expected_goodness=rec.get("R_ea"),
                                   categories=tuple(rec.get("categories", ())))
    return profiles
