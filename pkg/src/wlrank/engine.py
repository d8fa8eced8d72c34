"""Weighted rank reputation engine.

Each update period the engine turns a batch of rated, priced transactions
into new reputation ranks:

1. optionally merge all ratings of each (rater, ratee) pair,
2. accumulate ``rater_rank * rating * weight`` per ratee,
3. normalize the sums into differential ranks in [0, 1],
4. blend previous ranks with the differential ones using conservatism.

All functions are pure; nothing here holds state between calls.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

AgentId = int

RATING_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True, slots=True)
class Transaction:
    """One rated purchase of ``ratee``'s goods by ``rater``."""

    rater: AgentId
    ratee: AgentId
    category: int
    value: float
    rating: float
    day: int

    def __post_init__(self):
        if self.rater == self.ratee:
            raise ValueError(f"rater and ratee are the same agent ({self.rater})")
        if not self.value >= 0:
            raise ValueError(f"transaction value must be >= 0, got {self.value}")
        if not 0.0 <= self.rating <= 1.0:
            raise ValueError(f"rating must lie in [0, 1], got {self.rating}")
        if self.day < 0:
            raise ValueError(f"day must be >= 0, got {self.day}")


@dataclass(frozen=True)
class ReputationParams:
    default_rank: float = 0.5
    decayed_rank: float = 0.0
    conservatism: float = 0.5
    full_norm: bool = False
    log_ratings: bool = False
    aggregation: bool = False
    downrating: bool = False
    update_period: int = 1

    def __post_init__(self):
        for name in ("default_rank", "decayed_rank", "conservatism"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if int(self.update_period) != self.update_period or self.update_period < 1:
            raise ValueError(f"update_period must be an integer >= 1, got {self.update_period}")


@dataclass(frozen=True)
class RankState:
    """Ranks of every known agent at the end of an update period.

    ``period_end_day`` counts the days already folded into the ranks, so the
    state is what selections on that day see.
    """

    ranks: Mapping[AgentId, float] = field(default_factory=dict)
    period_end_day: int = 0

    def __post_init__(self):
        for agent, r in self.ranks.items():
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"rank of agent {agent} outside [0, 1]: {r}")

    def get(self, agent: AgentId, default: float) -> float:
        return self.ranks.get(agent, default)


def apply_downrating(rating: float) -> float:
    """Map [0, 0.25] onto [-1, 0] and [0.25, 1] onto [0, 1], linearly."""
    if not 0.0 <= rating <= 1.0:
        raise ValueError(f"rating must lie in [0, 1], got {rating}")
    if rating <= 0.25:
        return rating * 4.0 - 1.0
    return (rating - 0.25) / 0.75


def compute_weight(value: float, log_ratings: bool) -> float:
    if not value >= 0:
        raise ValueError(f"financial value must be >= 0, got {value}")
    return math.log10(1.0 + value) if log_ratings else float(value)


def aggregate_pairs(transactions: Iterable[Transaction], log_ratings: bool = False) -> list[Transaction]:
    """Collapse all ratings between each (rater, ratee) pair into one record.

    The merged rating is the weight-averaged rating (weights as in
    :func:`compute_weight`), the merged value is the summed value. Pairs whose
    total weight is zero get the plain mean rating. The category and day of
    the pair's last transaction are kept. Output follows first appearance.
    """
    groups: dict[tuple[AgentId, AgentId], list[Transaction]] = {}
    for t in transactions:
        groups.setdefault((t.rater, t.ratee), []).append(t)

    merged = []
    for (rater, ratee), items in groups.items():
        if len(items) == 1:
            merged.append(items[0])
            continue
        weights = [compute_weight(t.value, log_ratings) for t in items]
        total_w = math.fsum(weights)
        if total_w > 0:
            rating = math.fsum(w * t.rating for w, t in zip(weights, items)) / total_w
        else:
            rating = math.fsum(t.rating for t in items) / len(items)
        last = items[-1]
        merged.append(Transaction(
            rater=rater,
            ratee=ratee,
            category=last.category,
            value=math.fsum(t.value for t in items),
            rating=min(max(rating, 0.0), 1.0),
            day=last.day,
        ))
    return merged


def compute_differential(
    transactions: Iterable[Transaction],
    previous: RankState,
    params: ReputationParams,
) -> dict[AgentId, float]:
    """Sum ``rater_rank * rating * weight`` for every ratee.

    Raters without a previous rank count with the default rank. Agents that
    received no rating are absent from the result.
    """
    raw: dict[AgentId, float] = {}
    prev = previous.ranks
    default = params.default_rank
    for t in transactions:
        rater_value = prev.get(t.rater, default)
        rating_value = apply_downrating(t.rating) if params.downrating else t.rating
        weight = compute_weight(t.value, params.log_ratings)
        raw[t.ratee] = raw.get(t.ratee, 0.0) + rater_value * rating_value * weight
    return raw


def normalize(raw: Mapping[AgentId, float], full_norm: bool) -> dict[AgentId, float]:
    """Scale raw scores into [0, 1].

    ``full_norm`` selects min-max scaling; otherwise scores are divided by the
    largest score and negatives clamp to 0 (min-max again if no score is
    positive). If every score is equal, including a single score, all
    outputs are 1.0.
    """
    if not raw:
        return {}
    values = list(raw.values())
    lo, hi = min(values), max(values)
    if lo == hi:
        return {a: 1.0 for a in raw}
    if full_norm or hi <= 0:
        span = hi - lo
        return {a: (x - lo) / span for a, x in raw.items()}
    return {a: min(max(x / hi, 0.0), 1.0) for a, x in raw.items()}


def blend(
    previous: RankState,
    differential: Mapping[AgentId, float],
    params: ReputationParams,
    all_agents: Iterable[AgentId],
    period_end_day: int | None = None,
) -> RankState:
    """Convex blend of previous and differential ranks.

    ``new = C * old + (1 - C) * diff`` where unknown agents start from the
    default rank and agents without ratings this period blend toward the
    decayed rank.
    """
    c = params.conservatism
    prev = previous.ranks
    agents = dict.fromkeys(all_agents)
    agents.update(dict.fromkeys(differential))
    new = {}
    for a in agents:
        old = prev.get(a, params.default_rank)
        diff = differential.get(a, params.decayed_rank)
        new[a] = min(max(c * old + (1.0 - c) * diff, 0.0), 1.0)
    if params.full_norm:
        new = normalize(new, full_norm=True)
    if period_end_day is None:
        period_end_day = previous.period_end_day + params.update_period
    return RankState(ranks=new, period_end_day=period_end_day)


def update_ranks(
    transactions: Iterable[Transaction],
    previous: RankState,
    params: ReputationParams,
    all_agents: Iterable[AgentId],
    period_end_day: int | None = None,
) -> RankState:
    """Run one full update period and return the new rank state."""
    batch = list(transactions)
    if params.aggregation:
        batch = aggregate_pairs(batch, params.log_ratings)
    raw = compute_differential(batch, previous, params)
    differential = normalize(raw, params.full_norm)
    return blend(previous, differential, params, all_agents, period_end_day)


# Parameters of the healthy-market champion: weighted ratings, plain values,
# R_d = 0.5, C = 0.5, R_c = 0, no downrating, min-max normalization.
CHAMPION = ReputationParams(default_rank=0.5, decayed_rank=0.0, conservatism=0.5, full_norm=True,
                            log_ratings=False, aggregation=False, downrating=False, update_period=1)
