"""Security and equity metrics for a finished simulation.

Undefined metrics (empty denominators, zero variance, no eligible data) are
reported as ``None``, never as a silent zero.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .engine import AgentId, RankState
from .market import SimulationLog

Metric = float | None


@dataclass
class MetricsReport:
    market_tier: str = ""
    reputation_used: bool = False
    conservatism: float | None = None
    default_rank: float | None = None
    precision: Metric = None
    recall: Metric = None
    f1: Metric = None
    pcc_by_category: Metric = None
    pccg_by_category: Metric = None
    pccb_by_category: Metric = None
    loss_to_scam: Metric = None
    profit_from_scam: Metric = None
    utility: Metric = None
    utility_change: Metric = None
    accuracy: Metric = None
    volume_ratio: Metric = None
    strategy: str = ""
    update_period: int | None = None
    periodic_surge: bool = False
    payment_ratio: float | None = None
    cell: str = ""
    seed: int | None = None
    kind: str = "run"
    status: str = "ok"
    category_sizes: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> MetricsReport:
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown report fields: {sorted(unknown)}")
        d = dict(data)
        if "category_sizes" in d:
            d["category_sizes"] = {int(k): int(v) for k, v in d["category_sizes"].items()}
        return cls(**d)


def utility(log: SimulationLog) -> Metric:
    """Mean rating honest consumers gave to their purchases."""
    profiles = log.profiles
    total, n = 0.0, 0
    for t in log.transactions:
        if profiles[t.rater].honest:
            total += t.rating
            n += 1
    return total / n if n else None


def weighted_pcc(x: Sequence[float], y: Sequence[float], w: Sequence[float] | None = None) -> Metric:
    """Weighted Pearson correlation; uniform weights give the plain coefficient."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if w is None else np.asarray(w, dtype=float)
    if not (x.shape == y.shape == w.shape) or x.ndim != 1:
        raise ValueError("x, y and w must be 1-d arrays of equal length")
    if x.size < 2:
        raise ValueError("need at least two observations")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    sw = w.sum()
    if not sw > 0:
        raise ValueError("weights must not all be zero")
    dx = x - (w @ x) / sw
    dy = y - (w @ y) / sw
    cxx = (w @ (dx * dx)) / sw
    cyy = (w @ (dy * dy)) / sw
    # relative guard against round-off "variance" of constant data
    if cxx <= 1e-24 * max(1.0, float(np.max(np.abs(x))) ** 2) or cyy <= 1e-24 * max(1.0, float(np.max(np.abs(y))) ** 2):
        return None
    r = (w @ (dx * dy)) / sw / math.sqrt(cxx * cyy)
    return float(min(max(r, -1.0), 1.0))


def category_volumes(log: SimulationLog) -> dict[int, float]:
    volumes: dict[int, float] = {}
    for t in log.transactions:
        volumes[t.category] = volumes.get(t.category, 0.0) + t.value
    return volumes


def pcc_suite(
    ranks: RankState,
    truth: Mapping[AgentId, float],
    log: SimulationLog,
    default_rank: float = 0.0,
) -> tuple[Metric, Metric, Metric]:
    """Market-volume-weighted mean over categories of PCC, PCCG and PCCB.

    Each category compares computed ranks with expected goodness of its
    suppliers (those present in ``truth``). PCCG weights suppliers by their
    expected goodness, PCCB by one minus it. Categories with fewer than two
    suppliers, zero volume or an undefined coefficient are left out of the
    corresponding average.
    """
    members: dict[int, list[AgentId]] = {}
    for p in log.profiles.values():
        if p.is_supplier and p.id in truth:
            for c in p.categories:
                members.setdefault(c, []).append(p.id)
    if not any(len(m) >= 2 for m in members.values()):
        return None, None, None

    volumes = category_volumes(log)
    sums = [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]
    for c, ids in sorted(members.items()):
        vol = volumes.get(c, 0.0)
        if len(ids) < 2 or vol <= 0:
            continue
        x = [ranks.ranks.get(a, default_rank) for a in ids]
        y = [truth[a] for a in ids]
        good = [truth[a] for a in ids]
        bad = [1.0 - truth[a] for a in ids]
        for k, w in enumerate((None, good, bad)):
            if w is not None and sum(w) <= 0:
                continue
            r = weighted_pcc(x, y, w)
            if r is not None:
                sums[k][0] += vol * r
                sums[k][1] += vol
    out = tuple(s / v if v > 0 else None for s, v in sums)
    return out  # type: ignore[return-value]


def category_sizes(log: SimulationLog) -> dict[int, int]:
    sizes: dict[int, int] = {}
    for p in log.profiles.values():
        if p.is_supplier:
            for c in p.categories:
                sizes[c] = sizes.get(c, 0) + 1
    return dict(sorted(sizes.items()))


def confusion_counts(ranks: RankState, truth: Mapping[AgentId, bool], threshold: float,
                     default_rank: float = 0.0) -> tuple[int, int, int, int]:
    """(TP, FP, FN, TN) where "positive" means ranked strictly above threshold."""
    tp = fp = fn = tn = 0
    for agent, honest in truth.items():
        predicted_good = ranks.ranks.get(agent, default_rank) > threshold
        if predicted_good:
            if honest:
                tp += 1
            else:
                fp += 1
        elif honest:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def confusion_metrics(
    ranks: RankState,
    truth: Mapping[AgentId, bool],
    threshold: float = 0.4,
    default_rank: float = 0.0,
) -> tuple[Metric, Metric, Metric, Metric]:
    """Precision, recall, F1 and accuracy of "honest" predictions."""
    tp, fp, fn, tn = confusion_counts(ranks, truth, threshold, default_rank)
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total if total else None
    return precision, recall, f1, accuracy


def financial_metrics(log: SimulationLog) -> tuple[Metric, Metric, Metric]:
    """Volume ratio V_g/V_b, loss to scam (%) and profit from scam (%).

    Loss to scam is the share of honest consumers' spending that went to scam
    suppliers; profit from scam relates that same amount to the total spending
    of dishonest agents.
    """
    profiles = log.profiles
    good_spend = bad_spend = scammed = 0.0
    for t in log.transactions:
        if profiles[t.rater].honest:
            good_spend += t.value
            if not profiles[t.ratee].honest:
                scammed += t.value
        else:
            bad_spend += t.value
    volume_ratio = good_spend / bad_spend if bad_spend > 0 else None
    loss = 100.0 * scammed / good_spend if good_spend > 0 else None
    profit = 100.0 * scammed / bad_spend if bad_spend > 0 else None
    return volume_ratio, loss, profit


def evaluate(log: SimulationLog, baseline_utility: Metric = None) -> MetricsReport:
    """Compute the full report for one run.

    Rank-based metrics stay undefined for runs without a reputation system.
    ``baseline_utility`` (from the paired no-reputation run) enables
    ``utility_change`` in percent.
    """
    cfg = log.config
    rep = cfg.reputation
    report = MetricsReport(
        market_tier=cfg.market_tier,
        reputation_used=cfg.uses_reputation,
        strategy=cfg.strategy,
        payment_ratio=cfg.payment_ratio,
        periodic_surge=cfg.periodic_surge,
        seed=cfg.seed,
        category_sizes=category_sizes(log),
    )
    report.volume_ratio, report.loss_to_scam, report.profit_from_scam = financial_metrics(log)
    report.utility = utility(log)
    if baseline_utility and report.utility is not None:
        report.utility_change = 100.0 * (report.utility - baseline_utility) / baseline_utility
    elif not cfg.uses_reputation and report.utility is not None:
        report.utility_change = 0.0

    ranks = log.final_ranks
    if cfg.uses_reputation and ranks is not None:
        report.conservatism = rep.conservatism
        report.default_rank = rep.default_rank
        report.update_period = rep.update_period
        suppliers = log.suppliers()
        honesty = {p.id: p.honest for p in suppliers}
        goodness = {p.id: p.expected_goodness for p in suppliers}
        report.precision, report.recall, report.f1, report.accuracy = confusion_metrics(
            ranks, honesty, cfg.threshold, rep.default_rank)
        report.pcc_by_category, report.pccg_by_category, report.pccb_by_category = pcc_suite(
            ranks, goodness, log, rep.default_rank)
    return report
