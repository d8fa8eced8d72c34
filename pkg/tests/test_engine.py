import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wlrank.engine import (
    RATING_GRID,
    RankState,
    ReputationParams,
    Transaction,
    aggregate_pairs,
    apply_downrating,
    blend,
    compute_differential,
    compute_weight,
    normalize,
    update_ranks,
)


def tx(rater, ratee, rating=1.0, value=10.0, day=0, category=0):
    return Transaction(rater=rater, ratee=ratee, category=category, value=value, rating=rating, day=day)


def downrating_oracle(r):
    # line through (0, -1), (0.25, 0) and line through (0.25, 0), (1, 1)
    if r < 0.25:
        return -1.0 + (r - 0.0) * (0.0 - -1.0) / (0.25 - 0.0)
    return 0.0 + (r - 0.25) * (1.0 - 0.0) / (1.0 - 0.25)


class TestTransaction:
    def test_self_rating_rejected(self):
        with pytest.raises(ValueError):
            tx(1, 1)

    @pytest.mark.parametrize("kwargs", [{"value": -1.0}, {"rating": 1.5}, {"rating": -0.1}, {"day": -1}])
    def test_bad_fields_rejected(self, kwargs):
        with pytest.raises(ValueError):
            tx(1, 2, **kwargs)


class TestParams:
    @pytest.mark.parametrize("name", ["default_rank", "decayed_rank", "conservatism"])
    def test_unit_interval(self, name):
        with pytest.raises(ValueError, match=name):
            ReputationParams(**{name: 1.5})

    def test_update_period(self):
        with pytest.raises(ValueError):
            ReputationParams(update_period=0)

    def test_rank_state_range(self):
        with pytest.raises(ValueError):
            RankState({1: 1.2})


class TestDownrating:
    def test_endpoints(self):
        assert apply_downrating(0.0) == -1.0
        assert apply_downrating(0.25) == 0.0
        assert apply_downrating(1.0) == 1.0

    def test_interpolated_value(self):
        assert downrating_oracle(0.625) == pytest.approx(0.5)
        assert apply_downrating(0.625) == pytest.approx(downrating_oracle(0.625), abs=1e-15)

    @pytest.mark.parametrize("r", [i / 200 for i in range(201)])
    def test_matches_oracle(self, r):
        assert apply_downrating(r) == pytest.approx(downrating_oracle(r), abs=1e-12)

    def test_continuous_at_boundary(self):
        eps = 1e-12
        assert abs(apply_downrating(0.25 - eps) - apply_downrating(0.25 + eps)) < 1e-10

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert apply_downrating(lo) <= apply_downrating(hi)

    @pytest.mark.parametrize("r", [-0.01, 1.01])
    def test_domain(self, r):
        with pytest.raises(ValueError):
            apply_downrating(r)


class TestWeight:
    def test_examples(self):
        assert compute_weight(100, False) == 100
        assert compute_weight(9, True) == 1.0
        assert compute_weight(0, True) == 0.0

    def test_negative(self):
        with pytest.raises(ValueError):
            compute_weight(-1, True)

    @given(st.floats(0, 1e9), st.floats(0, 1e9))
    def test_log_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert compute_weight(lo, True) <= compute_weight(hi, True)


class TestAggregate:
    def test_weighted_average(self):
        items = [tx("A", "B", rating=1.0, value=10), tx("A", "B", rating=0.0, value=30)]
        # brute force weighted mean
        oracle = sum(t.rating * t.value for t in items) / sum(t.value for t in items)
        assert oracle == 0.25
        (out,) = aggregate_pairs(items)
        assert (out.rater, out.ratee) == ("A", "B")
        assert out.rating == pytest.approx(oracle)
        assert out.value == 40

    def test_singleton_unchanged(self):
        t = tx("A", "B", rating=0.75, value=12)
        assert aggregate_pairs([t]) == [t]

    def test_distinct_pairs_kept(self):
        items = [tx("A", "B"), tx("A", "C")]
        assert aggregate_pairs(items) == items

    def test_zero_weight_uses_plain_mean(self):
        items = [tx("A", "B", rating=1.0, value=0), tx("A", "B", rating=0.5, value=0)]
        (out,) = aggregate_pairs(items, log_ratings=True)
        assert out.rating == 0.75

    def test_log_weights(self):
        items = [tx("A", "B", rating=1.0, value=9), tx("A", "B", rating=0.0, value=99)]
        (out,) = aggregate_pairs(items, log_ratings=True)
        assert out.rating == pytest.approx(1.0 / 3.0)

    @settings(max_examples=200)
    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(4, 6), st.sampled_from(RATING_GRID),
                              st.floats(0, 1000)), max_size=40))
    def test_value_conserved_per_pair(self, rows):
        items = [tx(a, b, rating=r, value=v) for a, b, r, v in rows]
        merged = aggregate_pairs(items)
        assert len(merged) == len({(t.rater, t.ratee) for t in items})
        for m in merged:
            total = math.fsum(t.value for t in items if (t.rater, t.ratee) == (m.rater, m.ratee))
            assert m.value == pytest.approx(total, rel=1e-12, abs=1e-12)


class TestDifferential:
    def test_default_rater_rank(self):
        params = ReputationParams(default_rank=0.5)
        assert compute_differential([tx("A", "B")], RankState(), params) == {"B": 5.0}

    def test_empty(self):
        assert compute_differential([], RankState(), ReputationParams()) == {}

    def test_two_raters(self):
        prev = RankState({"A": 0.5, "C": 1.0})
        out = compute_differential([tx("A", "B"), tx("C", "B")], prev, ReputationParams())
        assert out == {"B": 15.0}

    def test_downrating_goes_negative(self):
        params = ReputationParams(downrating=True, default_rank=1.0)
        assert compute_differential([tx("A", "B", rating=0.0)], RankState(), params) == {"B": -10.0}


class TestNormalize:
    def test_divide_by_max(self):
        assert normalize({"A": 5, "B": 10}, full_norm=False) == {"A": 0.5, "B": 1.0}

    def test_min_max(self):
        assert normalize({"A": 5, "B": 10}, full_norm=True) == {"A": 0.0, "B": 1.0}

    @pytest.mark.parametrize("full", [False, True])
    def test_single_value(self, full):
        assert normalize({"A": 7}, full) == {"A": 1.0}

    def test_empty(self):
        assert normalize({}, True) == {}

    def test_negative_clamps(self):
        assert normalize({"A": -5, "B": 10}, full_norm=False) == {"A": 0.0, "B": 1.0}

    @settings(max_examples=300)
    @given(st.dictionaries(st.integers(0, 50), st.floats(-1e6, 1e6), min_size=1), st.booleans())
    def test_contains_one(self, raw, full):
        out = normalize(raw, full)
        assert max(out.values()) == 1.0
        assert all(0.0 <= v <= 1.0 for v in out.values())


class TestBlend:
    def test_full_conservatism_keeps_old(self):
        params = ReputationParams(conservatism=1.0)
        prev = RankState({"A": 0.3, "B": 0.9})
        out = blend(prev, {"A": 1.0, "B": 0.0}, params, {"A", "B"})
        assert out.ranks == {"A": 0.3, "B": 0.9}

    def test_zero_conservatism(self):
        params = ReputationParams(conservatism=0.0, decayed_rank=0.2)
        out = blend(RankState({"A": 0.3, "B": 0.9}), {"A": 0.6}, params, {"A", "B"})
        assert out.ranks == {"A": 0.6, "B": 0.2}

    def test_half(self):
        out = blend(RankState({"A": 0.5}), {"A": 1.0}, ReputationParams(conservatism=0.5), {"A"})
        assert out.ranks["A"] == 0.75

    def test_period_end_day(self):
        out = blend(RankState({}, period_end_day=14), {}, ReputationParams(update_period=7), {"A"})
        assert out.period_end_day == 21


class TestUpdateRanks:
    def test_empty_defaults(self):
        params = ReputationParams(default_rank=0.6, decayed_rank=0.1, conservatism=0.3)
        out = update_ranks([], RankState(), params, {"A"})
        assert out.ranks == {"A": pytest.approx(0.3 * 0.6 + 0.7 * 0.1)}

    def test_hand_composition(self):
        params = ReputationParams(default_rank=0.5, conservatism=0.5, decayed_rank=0.0)
        out = update_ranks([tx("A", "B")], RankState(), params, {"A", "B"})
        assert out.ranks == {"A": 0.25, "B": 0.75}

    def test_two_ratees(self):
        params = ReputationParams(conservatism=0.5)
        prev = RankState({"A": 0.5, "B": 0.5, "C": 0.5})
        # raw: B gets 0.5 * 1.0 * 10 = 5, C gets 0.5 * 1.0 * 20 = 10
        out = update_ranks([tx("A", "B", value=10), tx("A", "C", value=20)], prev, params, {"B", "C"})
        assert out.ranks["B"] == 0.5
        assert out.ranks["C"] == 0.75

    def test_aggregation_path(self):
        params = ReputationParams(aggregation=True, conservatism=0.0)
        items = [tx("A", "B", rating=1.0, value=10), tx("A", "B", rating=0.0, value=30), tx("A", "C", value=5)]
        out = update_ranks(items, RankState(), params, set())
        # B: 0.5 * 0.25 * 40 = 5, C: 0.5 * 1.0 * 5 = 2.5
        assert out.ranks == {"B": 1.0, "C": 0.5}


def random_case(rng: random.Random):
    agents = list(range(rng.randint(2, 12)))
    params = ReputationParams(
        default_rank=rng.random(), decayed_rank=rng.random(), conservatism=rng.random(),
        full_norm=rng.random() < 0.5, log_ratings=rng.random() < 0.5,
        aggregation=rng.random() < 0.5, downrating=rng.random() < 0.5,
    )
    prev = RankState({a: rng.random() for a in agents if rng.random() < 0.7})
    items = []
    for _ in range(rng.randint(0, 30)):
        a, b = rng.sample(agents, 2)
        items.append(tx(a, b, rating=rng.choice(RATING_GRID), value=rng.choice([0.0, rng.uniform(0, 1e4)])))
    return items, prev, params, set(agents)


def test_ranks_in_unit_interval_randomized():
    rng = random.Random(20240611)
    for _ in range(10_000):
        items, prev, params, agents = random_case(rng)
        out = update_ranks(items, prev, params, agents)
        assert all(0.0 <= r <= 1.0 for r in out.ranks.values())
        assert set(out.ranks) >= agents


def test_full_conservatism_identity_randomized():
    rng = random.Random(7)
    for _ in range(2_000):
        items, prev, params, agents = random_case(rng)
        params = ReputationParams(default_rank=params.default_rank, conservatism=1.0, full_norm=False,
                                  downrating=params.downrating, log_ratings=params.log_ratings)
        out = update_ranks(items, prev, params, agents)
        for a, r in prev.ranks.items():
            assert out.ranks[a] == r


def test_bitwise_deterministic():
    rng = random.Random(3)
    for _ in range(500):
        items, prev, params, agents = random_case(rng)
        a = update_ranks(items, prev, params, agents)
        b = update_ranks(list(items), RankState(dict(prev.ranks)), params, set(agents))
        assert a.ranks == b.ranks
        assert [(k, v.hex()) for k, v in a.ranks.items()] == [(k, v.hex()) for k, v in b.ranks.items()]


@settings(max_examples=200)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(5, 9), st.sampled_from(RATING_GRID),
                          st.floats(0.01, 1000)), min_size=1, max_size=30),
       st.floats(0.01, 1000))
def test_value_scaling_keeps_ratee_order(rows, k):
    params = ReputationParams(conservatism=0.0)
    base = [tx(a, b, rating=r, value=v) for a, b, r, v in rows]
    scaled = [tx(a, b, rating=r, value=v * k) for a, b, r, v in rows]
    raw1 = compute_differential(base, RankState(), params)
    raw2 = compute_differential(scaled, RankState(), params)
    ratees = sorted(raw1)
    for i in ratees:
        for j in ratees:
            # strict orderings survive scaling unless the gap is lost to round-off
            if raw1[i] < raw1[j] and not math.isclose(raw1[i], raw1[j], rel_tol=1e-9):
                assert raw2[i] < raw2[j]
    r1 = update_ranks(base, RankState(), params, set())
    r2 = update_ranks(scaled, RankState(), params, set())
    for i in ratees:
        for j in ratees:
            if r1.ranks[i] < r1.ranks[j] and not math.isclose(r1.ranks[i], r1.ranks[j], rel_tol=1e-9):
                assert r2.ranks[i] <= r2.ranks[j]
