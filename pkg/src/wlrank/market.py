"""Agent-based marketplace simulation.

A daily-tick market of consumers and suppliers. Honest consumers buy what
they need most, stay with suppliers that satisfy them and rate every purchase
around the supplier's intrinsic goodness. Scam suppliers are always rated 0
by honest consumers; dishonest consumers pump the suppliers of their ring with
many cheap, perfectly rated transactions. When a usage strategy other than
``no_reputation`` is configured, new suppliers are picked using the ranks
published by the reputation engine at the end of the previous update period.
"""

from __future__ import annotations

import math
import random
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .engine import AgentId, RankState, ReputationParams, Transaction, update_ranks

CONSUMER = "consumer"
SUPPLIER = "supplier"

STRATEGIES = ("winner_take_all", "roulette_wheel", "thresholded_random", "no_reputation")

MARKET_TIERS = {10: "unhealthy", 20: "semi-healthy", 100: "healthy"}


class ConfigurationError(ValueError):
    """Raised for scenario settings that cannot produce a valid market."""


def bucket_rating(x: float) -> float:
    """Clamp to [0, 1] and round to the nearest quarter (halves round up)."""
    x = min(max(x, 0.0), 1.0)
    return math.floor(x * 4.0 + 0.5) / 4.0


@dataclass(frozen=True)
class BehaviorParams:
    """Normal (mean, sd) distributions for per-agent behavior traits."""

    goodness: tuple[float, float] = (0.75, 0.15)
    ring_size: tuple[float, float] = (8.0, 4.0)
    rating_sigma: float = 0.15
    need_intensity: tuple[float, float] = (0.5, 0.2)
    reorder_interval: tuple[float, float] = (4.0, 1.0)
    reorder_jitter: float = 0.25
    daily_shopping_limit: tuple[float, float] = (6.0, 2.0)
    novelty_propensity: tuple[float, float] = (0.01, 0.005)
    churn_tolerance: tuple[float, float] = (0.2, 0.05)
    forgetting_capacity: tuple[float, float] = (0.01, 0.005)
    categories_per_supplier: tuple[int, int] = (1, 1)
    equilibrium_demand: bool = True
    staggered_start: bool = True
    initial_relationships: bool = True
    active_probability: float = 1.0

    def __post_init__(self):
        for name in ("goodness", "ring_size", "need_intensity", "reorder_interval",
                     "daily_shopping_limit", "novelty_propensity", "churn_tolerance",
                     "forgetting_capacity"):
            mean, sd = getattr(self, name)
            if sd < 0:
                raise ConfigurationError(f"behavior.{name}: standard deviation must be >= 0")
        if self.rating_sigma < 0:
            raise ConfigurationError("behavior.rating_sigma must be >= 0")
        if self.reorder_interval[0] < 1:
            raise ConfigurationError("behavior.reorder_interval: mean must be >= 1 day")
        lo, hi = self.categories_per_supplier
        if not 1 <= lo <= hi:
            raise ConfigurationError("behavior.categories_per_supplier must satisfy 1 <= min <= max")
        if not 0.0 < self.active_probability <= 1.0:
            raise ConfigurationError("behavior.active_probability must lie in (0, 1]")


def default_price_ranges(n_categories: int, low: float = 20.0, high: float = 40.0) -> list[tuple[float, float]]:
    """Adjacent log-spaced (min, max) price bands covering [low, high]."""
    edges = np.logspace(math.log10(low), math.log10(high), n_categories + 1)
    return [(float(edges[i]), float(edges[i + 1])) for i in range(n_categories)]


@dataclass(frozen=True)
class ScenarioConfig:
    n_agents: int = 1000
    supplier_fraction: float = 0.1
    bad_fraction: float = 0.2
    days: int = 180
    bad_transaction_multiplier: int = 10
    payment_ratio: float = 100.0
    n_categories: int = 20
    category_price_ranges: tuple[tuple[float, float], ...] | None = None
    price_span: tuple[float, float] = (20.0, 40.0)
    strategy: str = "roulette_wheel"
    threshold: float = 0.4
    periodic_surge: bool = False
    surge_period: int = 7
    surge_good_fraction: float = 0.5
    surge_boost: float = 3.0
    seed: int = 0
    reputation: ReputationParams = field(default_factory=ReputationParams)
    behavior: BehaviorParams = field(default_factory=BehaviorParams)

    def __post_init__(self):
        if self.n_agents < 2:
            raise ConfigurationError("n_agents must be >= 2")
        if math.floor(self.supplier_fraction * self.n_agents) < 1:
            raise ConfigurationError("supplier_fraction * n_agents must give at least one supplier")
        if not 0.0 < self.supplier_fraction < 1.0:
            raise ConfigurationError("supplier_fraction must lie in (0, 1)")
        if not 0.0 < self.bad_fraction < 1.0:
            raise ConfigurationError("bad_fraction must lie in (0, 1)")
        if self.days < 0:
            raise ConfigurationError("days must be >= 0")
        if self.bad_transaction_multiplier < 1:
            raise ConfigurationError("bad_transaction_multiplier must be >= 1")
        if not self.payment_ratio > 0:
            raise ConfigurationError("payment_ratio must be > 0")
        if self.n_categories < 1:
            raise ConfigurationError("n_categories must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigurationError("threshold must lie in [0, 1]")
        if self.surge_period < 1:
            raise ConfigurationError("surge_period must be >= 1")
        if not 0.0 <= self.surge_good_fraction <= 1.0:
            raise ConfigurationError("surge_good_fraction must lie in [0, 1]")
        if self.surge_boost < 1.0:
            raise ConfigurationError("surge_boost must be >= 1")
        if self.category_price_ranges is not None:
            ranges = tuple((float(lo), float(hi)) for lo, hi in self.category_price_ranges)
            if len(ranges) != self.n_categories:
                raise ConfigurationError("category_price_ranges needs one (min, max) pair per category")
            if any(not 0 <= lo <= hi for lo, hi in ranges):
                raise ConfigurationError("category_price_ranges entries must satisfy 0 <= min <= max")
            object.__setattr__(self, "category_price_ranges", ranges)

    @cached_property
    def price_ranges(self) -> tuple[tuple[float, float], ...]:
        if self.category_price_ranges is not None:
            return self.category_price_ranges
        return tuple(default_price_ranges(self.n_categories, *self.price_span))

    @property
    def uses_reputation(self) -> bool:
        return self.strategy != "no_reputation"

    @property
    def market_tier(self) -> str:
        return MARKET_TIERS.get(int(self.payment_ratio), f"ratio-{self.payment_ratio:g}")

    @property
    def surge_categories(self) -> frozenset[int]:
        # even-numbered categories first, so the default half is every other one
        n = round(self.surge_good_fraction * self.n_categories)
        return frozenset(sorted(range(self.n_categories), key=lambda c: (c % 2, c))[:n])


@dataclass(frozen=True)
class AgentProfile:
    id: AgentId
    role: str
    honest: bool
    expected_goodness: float | None = None
    ring: frozenset[AgentId] = frozenset()
    categories: tuple[int, ...] = ()
    need_means: tuple[float, ...] = ()
    reorder_interval: tuple[tuple[float, float], ...] = ()
    daily_shopping_limit: int = 1
    novelty_propensity: float = 0.0
    churn_tolerance: float = 0.0
    forgetting_capacity: float = 0.0

    @property
    def is_supplier(self) -> bool:
        return self.role == SUPPLIER


@dataclass
class ConsumerState:
    """Mutable per-consumer bookkeeping during a run."""

    due: set[int] = field(default_factory=set)
    next_due: list[int] = field(default_factory=list)
    current: dict[int, AgentId] = field(default_factory=dict)
    dropped: set[AgentId] = field(default_factory=set)
    history: dict[AgentId, list[float]] = field(default_factory=dict)


@dataclass
class SimulationLog:
    transactions: list[Transaction]
    profiles: dict[AgentId, AgentProfile]
    rank_history: list[RankState]
    config: ScenarioConfig

    @property
    def final_ranks(self) -> RankState | None:
        return self.rank_history[-1] if self.rank_history else None

    def suppliers(self) -> list[AgentProfile]:
        return [p for p in self.profiles.values() if p.is_supplier]


def _streams(seed: int) -> tuple[random.Random, random.Random]:
    """Independent population and market streams derived from one seed."""
    pop, mkt = np.random.SeedSequence(seed).spawn(2)
    return (random.Random(int(pop.generate_state(2, np.uint64)[0])),
            random.Random(int(mkt.generate_state(2, np.uint64)[0])))


def _clamped(rng: random.Random, dist: tuple[float, float], lo: float, hi: float) -> float:
    return min(max(rng.gauss(*dist), lo), hi)


def population_counts(config: ScenarioConfig) -> dict[str, int]:
    """Role and honesty counts (floor for suppliers and for bad agents per role)."""
    n_sup = math.floor(config.supplier_fraction * config.n_agents)
    n_con = config.n_agents - n_sup
    bad_sup = math.floor(config.bad_fraction * n_sup + 1e-9)
    bad_con = math.floor(config.bad_fraction * n_con + 1e-9)
    return {"suppliers": n_sup, "consumers": n_con, "bad_suppliers": bad_sup, "bad_consumers": bad_con}


def _build_rings(bad_ids: list[AgentId], scam_ids: set[AgentId], dist: tuple[float, float],
                 rng: random.Random) -> dict[AgentId, set[AgentId]]:
    rings: dict[AgentId, set[AgentId]] = {a: set() for a in bad_ids}
    if len(bad_ids) < 2:
        return rings
    targets = {a: int(min(max(round(rng.gauss(*dist)), 1), len(bad_ids) - 1)) for a in bad_ids}
    for a in bad_ids:
        while len(rings[a]) < targets[a]:
            pool = [b for b in bad_ids if b != a and b not in rings[a]]
            open_pool = [b for b in pool if len(rings[b]) < targets[b]]
            b = rng.choice(open_pool or pool)
            rings[a].add(b)
            rings[b].add(a)
    # every pumping consumer needs at least one scam supplier to pump
    scam_list = sorted(scam_ids)
    for a in bad_ids:
        if a not in scam_ids and scam_list and not rings[a] & scam_ids:
            b = rng.choice(scam_list)
            rings[a].add(b)
            rings[b].add(a)
    return rings


def _assign_categories(honest_ids: list[AgentId], scam_ids: list[AgentId], config: ScenarioConfig,
                       rng: random.Random) -> dict[AgentId, list[int]]:
    """Deal suppliers round-robin over categories, honest ones first.

    Every category gets the same number of suppliers (up to one) and scam
    suppliers are spread as evenly as the counts allow. Suppliers drawing more
    than one category get the extra ones at random.
    """
    lo, hi = config.behavior.categories_per_supplier
    n_cat = config.n_categories
    n_sup = len(honest_ids) + len(scam_ids)
    if n_cat > n_sup * hi:
        raise ConfigurationError(
            f"{n_cat} categories cannot all be covered by {n_sup} suppliers "
            f"carrying at most {hi} categories each")
    honest, scam = honest_ids[:], scam_ids[:]
    rng.shuffle(honest)
    rng.shuffle(scam)
    cats: dict[AgentId, list[int]] = {}
    for i, s in enumerate(honest + scam):
        cats[s] = [i % n_cat]
    # categories left empty when suppliers are scarce
    for c in range(n_sup, n_cat):
        cats[rng.choice(honest + scam)].append(c)
    for s in honest + scam:
        k = min(rng.randint(lo, hi), n_cat)
        extra = [c for c in range(n_cat) if c not in cats[s]]
        rng.shuffle(extra)
        while len(cats[s]) < k:
            cats[s].append(extra.pop())
        cats[s].sort()
    return cats


def demand_scale(config: ScenarioConfig, cats: Mapping[AgentId, Sequence[int]]) -> list[float]:
    """Per-category multiplier on reorder intervals.

    With ``behavior.equilibrium_demand`` the interval grows with the category
    price and shrinks with its number of suppliers, so the money spent per
    supplier is the same in every category.
    """
    n_cat = config.n_categories
    if not config.behavior.equilibrium_demand:
        return [1.0] * n_cat
    counts = [0] * n_cat
    for cs in cats.values():
        for c in cs:
            counts[c] += 1
    mids = [(lo + hi) / 2 for lo, hi in config.price_ranges]
    ref_price = math.exp(sum(math.log(m) for m in mids) / n_cat) if all(m > 0 for m in mids) else 1.0
    ref_count = sum(counts) / n_cat
    return [(m / ref_price if m > 0 else 1.0) * (ref_count / n) for m, n in zip(mids, counts)]


def init_population(config: ScenarioConfig, rng: random.Random) -> dict[AgentId, AgentProfile]:
    """Create suppliers (ids first) and consumers with their behaviors.

    Ids ``0 .. n_suppliers-1`` are suppliers and the rest consumers; within
    each role the first ids are the dishonest agents.
    """
    counts = population_counts(config)
    n_sup, n_con = counts["suppliers"], counts["consumers"]
    beh = config.behavior
    supplier_ids = list(range(n_sup))
    consumer_ids = list(range(n_sup, n_sup + n_con))
    scam_ids = set(supplier_ids[:counts["bad_suppliers"]])
    bad_consumer_ids = set(consumer_ids[:counts["bad_consumers"]])

    cats = _assign_categories([s for s in supplier_ids if s not in scam_ids], sorted(scam_ids), config, rng)
    scale = demand_scale(config, cats)
    rings = _build_rings(sorted(scam_ids | bad_consumer_ids), scam_ids, beh.ring_size, rng)

    profiles: dict[AgentId, AgentProfile] = {}
    for s in supplier_ids:
        honest = s not in scam_ids
        if honest:
            goodness = max(bucket_rating(rng.gauss(*beh.goodness)), 0.25)
        else:
            goodness = 0.0
        profiles[s] = AgentProfile(
            id=s, role=SUPPLIER, honest=honest, expected_goodness=goodness,
            ring=frozenset(rings.get(s, ())), categories=tuple(cats[s]),
        )
    for c in consumer_ids:
        intervals = []
        for k in range(config.n_categories):
            mu = max(rng.gauss(*beh.reorder_interval) * scale[k], 1.0)
            intervals.append((mu, mu * beh.reorder_jitter))
        profiles[c] = AgentProfile(
            id=c, role=CONSUMER, honest=c not in bad_consumer_ids,
            ring=frozenset(rings.get(c, ())),
            need_means=tuple(_clamped(rng, beh.need_intensity, 0.0, 1.0) for _ in range(config.n_categories)),
            reorder_interval=tuple(intervals),
            daily_shopping_limit=max(int(round(rng.gauss(*beh.daily_shopping_limit))), 1),
            novelty_propensity=_clamped(rng, beh.novelty_propensity, 0.0, 1.0),
            churn_tolerance=_clamped(rng, beh.churn_tolerance, 0.0, 1.0),
            forgetting_capacity=_clamped(rng, beh.forgetting_capacity, 0.0, 1.0),
        )
    return profiles


def make_shopping_list(
    consumer: AgentProfile,
    day: int,
    state: ConsumerState,
    surge_categories: frozenset[int] = frozenset(),
    surge_boost: float = 3.0,
) -> list[int]:
    """Due categories, most needed first, cut at the daily shopping limit.

    ``surge_categories`` is non-empty only on surge days; those categories
    count as due and their need intensity is multiplied by ``surge_boost``.
    """
    due = state.due | surge_categories if surge_categories else state.due
    if not due:
        return []
    needs = consumer.need_means

    def intensity(c: int) -> float:
        return needs[c] * surge_boost if c in surge_categories else needs[c]

    return sorted(due, key=lambda c: (-intensity(c), c))[:consumer.daily_shopping_limit]


def select_supplier(
    consumer: AgentProfile,
    category: int,
    ranks: RankState | None,
    config: ScenarioConfig,
    rng: random.Random,
    candidates: Sequence[AgentId],
) -> AgentId | None:
    """Pick a new supplier for ``category`` among ``candidates``.

    ``candidates`` are the category's suppliers the consumer is willing to
    try (dropped ones already removed). Suppliers missing from ``ranks``
    count with the default rank.
    """
    if not candidates:
        return None
    strategy = config.strategy
    if strategy == "no_reputation" or ranks is None:
        return rng.choice(candidates)
    default = config.reputation.default_rank
    rank_of = ranks.ranks
    if strategy == "winner_take_all":
        return max(candidates, key=lambda s: (rank_of.get(s, default), -s))
    if strategy == "roulette_wheel":
        weights = [rank_of.get(s, default) for s in candidates]
        if sum(weights) <= 0:
            return rng.choice(candidates)
        return rng.choices(candidates, weights=weights)[0]
    if strategy == "thresholded_random":
        above = [s for s in candidates if rank_of.get(s, default) > config.threshold]
        return rng.choice(above) if above else None
    raise ConfigurationError(f"unknown strategy {strategy!r}")


def execute_purchase(
    consumer: AgentProfile,
    supplier: AgentProfile,
    category: int,
    config: ScenarioConfig,
    rng: random.Random,
    day: int,
) -> Transaction:
    lo, hi = config.price_ranges[category]
    value = rng.uniform(lo, hi)
    if not consumer.honest:
        value /= config.payment_ratio
    if not consumer.honest and supplier.id in consumer.ring:
        rating = 1.0
    elif not supplier.honest:
        rating = 0.0
    else:
        rating = bucket_rating(rng.gauss(supplier.expected_goodness, config.behavior.rating_sigma))
    return Transaction(rater=consumer.id, ratee=supplier.id, category=category,
                       value=value, rating=rating, day=day)


def record_rating(state: ConsumerState, supplier: AgentId, rating: float) -> None:
    h = state.history.get(supplier)
    if h is None:
        state.history[supplier] = [rating, 1]
    else:
        h[0] += rating
        h[1] += 1


def churn_suppliers(
    consumer: AgentProfile,
    history: Mapping[AgentId, Sequence[float]],
    retained: Mapping[int, AgentId],
) -> tuple[dict[int, AgentId], set[AgentId]]:
    """Drop suppliers whose mean rating from this consumer is below tolerance.

    ``history`` maps supplier -> (rating sum, count) and ``retained`` maps
    category -> current supplier. Returns the surviving retained map and the
    set of suppliers dropped now. A mean exactly at tolerance is kept.
    """
    dropped = set()
    for supplier, (total, n) in history.items():
        if n and total / n < consumer.churn_tolerance:
            dropped.add(supplier)
    kept = {c: s for c, s in retained.items() if s not in dropped}
    return kept, dropped


def forget_suppliers(consumer: AgentProfile, state: ConsumerState, rng: random.Random) -> set[AgentId]:
    """Each dropped supplier becomes eligible again with the forgetting probability."""
    p = consumer.forgetting_capacity
    if not state.dropped or p <= 0:
        return set()
    forgotten = {s for s in sorted(state.dropped) if rng.random() < p}
    for s in forgotten:
        state.dropped.discard(s)
        state.history.pop(s, None)
    return forgotten


def _draw_interval(consumer: AgentProfile, category: int, rng: random.Random) -> int:
    mu, sd = consumer.reorder_interval[category]
    return max(int(round(rng.gauss(mu, sd))), 1)


def run_simulation(config: ScenarioConfig) -> SimulationLog:
    """Simulate ``config.days`` days and return the full log.

    Ranks are recomputed after every ``update_period`` days and become
    visible from the next day on. Days after the last full period are logged
    but not folded into the ranks.
    """
    pop_rng, rng = _streams(config.seed)
    profiles = init_population(config, pop_rng)
    # consumers are never rated, so only suppliers carry ranks and raters
    # always weigh in with the default rank
    ranked_ids = sorted(p.id for p in profiles.values() if p.is_supplier)
    params = config.reputation
    use_rep = config.uses_reputation

    by_category: list[list[AgentId]] = [[] for _ in range(config.n_categories)]
    for p in profiles.values():
        if p.is_supplier:
            for c in p.categories:
                by_category[c].append(p.id)

    consumers = [p for p in profiles.values() if not p.is_supplier]
    states: dict[AgentId, ConsumerState] = {}
    calendar: dict[int, list[tuple[AgentId, int]]] = {}
    for p in consumers:
        st = ConsumerState(next_due=[0] * config.n_categories)
        for c in range(config.n_categories):
            first = rng.randrange(max(int(p.reorder_interval[c][0]), 1)) if config.behavior.staggered_start else 0
            st.next_due[c] = first
            calendar.setdefault(first, []).append((p.id, c))
            if config.behavior.initial_relationships and p.honest and by_category[c]:
                st.current[c] = rng.choice(by_category[c])
        states[p.id] = st
    ring_suppliers = {
        p.id: sorted(s for s in p.ring if profiles[s].is_supplier)
        for p in consumers if not p.honest
    }

    ranks = RankState({a: params.default_rank for a in ranked_ids}, period_end_day=0) if use_rep else None
    rank_history = [ranks] if use_rep else []
    transactions: list[Transaction] = []
    period_start = 0
    surge_set = config.surge_categories
    active_p = config.behavior.active_probability

    for day in range(config.days):
        for cid, c in calendar.pop(day, ()):
            st = states[cid]
            if st.next_due[c] == day:
                st.due.add(c)
        surging = surge_set if config.periodic_surge and day % config.surge_period == 0 else frozenset()

        for consumer in consumers:
            st = states[consumer.id]
            if not st.due and not surging:
                continue
            if active_p < 1.0 and rng.random() >= active_p:
                continue
            items = make_shopping_list(consumer, day, st, surging, config.surge_boost)
            if consumer.honest:
                for c in items:
                    supplier = _choose(consumer, c, st, ranks, config, rng, by_category[c])
                    if supplier is None:
                        continue
                    t = execute_purchase(consumer, profiles[supplier], c, config, rng, day)
                    transactions.append(t)
                    st.current[c] = supplier
                    record_rating(st, supplier, t.rating)
                    st.current, dropped = churn_suppliers(consumer, {supplier: st.history[supplier]}, st.current)
                    st.dropped |= dropped
                    _reschedule(consumer, c, day, st, calendar, rng)
                forget_suppliers(consumer, st, rng)
            else:
                targets = ring_suppliers[consumer.id]
                for c in items:
                    if targets:
                        for _ in range(config.bad_transaction_multiplier):
                            s = profiles[rng.choice(targets)]
                            cat = rng.choice(s.categories)
                            transactions.append(execute_purchase(consumer, s, cat, config, rng, day))
                    _reschedule(consumer, c, day, st, calendar, rng)

        if use_rep and day + 1 - period_start >= params.update_period:
            ranks = update_ranks(_tail(transactions, period_start), ranks, params, ranked_ids, period_end_day=day + 1)
            rank_history.append(ranks)
            period_start = day + 1

    return SimulationLog(transactions=transactions, profiles=profiles,
                         rank_history=rank_history, config=config)


def _tail(transactions: list[Transaction], first_day: int) -> list[Transaction]:
    i = len(transactions)
    while i > 0 and transactions[i - 1].day >= first_day:
        i -= 1
    return transactions[i:]


def _reschedule(consumer: AgentProfile, c: int, day: int, st: ConsumerState,
                calendar: dict[int, list[tuple[AgentId, int]]], rng: random.Random) -> None:
    st.due.discard(c)
    nxt = day + _draw_interval(consumer, c, rng)
    st.next_due[c] = nxt
    calendar.setdefault(nxt, []).append((consumer.id, c))


def _choose(consumer: AgentProfile, c: int, st: ConsumerState, ranks: RankState | None,
            config: ScenarioConfig, rng: random.Random, offered: list[AgentId]) -> AgentId | None:
    current = st.current.get(c)
    if current is not None and not rng.random() < consumer.novelty_propensity:
        return current
    candidates = [s for s in offered if s not in st.dropped and s != current]
    chosen = select_supplier(consumer, c, ranks, config, rng, candidates)
    return chosen if chosen is not None else current


def with_overrides(config: ScenarioConfig, **changes) -> ScenarioConfig:
    """Copy of ``config`` with top-level and ``reputation_*`` overrides applied."""
    rep = {k[len("reputation_"):]: v for k, v in changes.items() if k.startswith("reputation_")}
    top = {k: v for k, v in changes.items() if not k.startswith("reputation_")}
    if rep:
        top["reputation"] = replace(config.reputation, **rep)
    return replace(config, **top)
