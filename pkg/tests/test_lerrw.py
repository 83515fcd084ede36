import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from reinforced.exceptions import EnumerationLimitError, InvalidPathError
from reinforced.lerrw import (
    ENUMERATION_CAP,
    ReinforcedState,
    distribution_of_position,
    enumerate_paths,
    geometric_checkpoints,
    log_path_probability,
    path_probability,
    simulate,
    simulate_with_state,
    step,
)
from reinforced.resistance import WeightSequence
from reinforced.weights import Family, WeightProfile

GRID = [
    WeightProfile(alpha=-1, beta=1, delta=1),
    WeightProfile(alpha=0, beta=-1, delta=1),
    WeightProfile(alpha=0, beta=1, delta=2),
    WeightProfile(alpha=0.5, beta=1, delta=1),
    WeightProfile(alpha=1, beta=-2, delta=1),
    WeightProfile(alpha=1, beta=1, delta=0.5),
    WeightProfile(family=Family.TAKEI_POLY, alpha=0.5, delta=1),
]


def random_path(rng: np.random.Generator, n: int):
    path = [0]
    for _ in range(n):
        x = path[-1]
        path.append(x + 1 if x == 0 or rng.random() < 0.5 else x - 1)
    return path


class TestStep:
    def test_origin_always_steps_right(self, unit_profile):
        rng = np.random.default_rng(0)
        for _ in range(20):
            state = step(ReinforcedState(), unit_profile, rng)
            assert state.position == 1
            assert state.edge_counts == {0: 1}

    def test_left_probability_after_one_crossing(self, unit_profile):
        state = ReinforcedState(position=1, edge_counts={0: 1}, step=1)
        assert 1 - state.right_probability(unit_profile) == pytest.approx(2 / 3)

    def test_unreinforced_flat_walk_is_symmetric(self, flat_walk):
        state = ReinforcedState(position=3, edge_counts={0: 1, 1: 1, 2: 1}, step=3)
        assert state.right_probability(flat_walk) == 0.5

    def test_counts_sum_to_steps(self, unit_profile):
        state = ReinforcedState()
        rng = np.random.default_rng(11)
        for _ in range(300):
            prev = state.position
            step(state, unit_profile, rng)
            assert abs(state.position - prev) == 1 and state.position >= 0
        assert sum(state.edge_counts.values()) == state.step == 300

    def test_step_and_simulate_follow_the_same_rule(self, unit_profile):
        state = ReinforcedState()
        rng = np.random.default_rng(5)
        for _ in range(500):
            step(state, unit_profile, rng)
        _, simulated = simulate_with_state(unit_profile, 500, rng=np.random.default_rng(5))
        assert simulated.position == state.position
        assert simulated.edge_counts == state.edge_counts


class TestPathProbability:
    def test_empty_path(self, unit_profile):
        assert path_probability(unit_profile, [0]) == 1.0

    def test_return_after_one_step(self, unit_profile):
        assert path_probability(unit_profile, [0, 1, 0]) == pytest.approx(2 / 3, rel=1e-14)

    def test_two_steps_right(self, unit_profile):
        assert path_probability(unit_profile, [0, 1, 2]) == pytest.approx(1 / 3, rel=1e-14)

    @pytest.mark.parametrize("path", [[1, 2], [0, 2], [0, 1, 0, -1], []])
    def test_invalid_paths(self, unit_profile, path):
        with pytest.raises(InvalidPathError):
            log_path_probability(unit_profile, path)

    def test_unreinforced_matches_fixed_weight_walk(self):
        profile = WeightProfile(alpha=-1, beta=-2, delta=0)
        p_right = WeightSequence.from_profile(profile, 40).step_right_probabilities()
        rng = np.random.default_rng(1)
        for _ in range(20):
            path = random_path(rng, 30)
            expected = math.fsum(
                math.log(p_right[a]) if b > a else math.log1p(-p_right[a]) for a, b in zip(path, path[1:])
            )
            assert log_path_probability(profile, path) == pytest.approx(expected, rel=1e-12)

    def test_same_crossing_counts_same_probability(self, unit_profile):
        # both paths cross edge 0 twice each way and edge 1 once each way
        a = [0, 1, 2, 1, 0, 1, 0]
        b = [0, 1, 0, 1, 2, 1, 0]
        assert path_probability(unit_profile, a) == pytest.approx(path_probability(unit_profile, b), rel=1e-14)


class TestDistribution:
    def test_one_step(self, unit_profile):
        assert distribution_of_position(unit_profile, 1) == {1: 1.0}

    def test_two_steps(self, unit_profile):
        dist = distribution_of_position(unit_profile, 2)
        assert set(dist) == {0, 2}
        assert dist[0] == pytest.approx(2 / 3)
        assert dist[2] == pytest.approx(1 / 3)

    @pytest.mark.parametrize("profile", GRID)
    def test_normalised_at_twelve(self, profile):
        dist = distribution_of_position(profile, 12)
        assert math.fsum(dist.values()) == pytest.approx(1.0, abs=1e-12)
        assert all(x % 2 == 0 for x in dist)

    def test_enumeration_cap(self, unit_profile):
        with pytest.raises(EnumerationLimitError):
            distribution_of_position(unit_profile, ENUMERATION_CAP + 1)
        with pytest.raises(EnumerationLimitError):
            enumerate_paths(unit_profile, ENUMERATION_CAP + 1)

    def test_enumerated_paths_match_probabilities(self, unit_profile):
        paths = enumerate_paths(unit_profile, 6)
        assert len(paths) == len({tuple(p) for p in paths})
        assert math.fsum(path_probability(unit_profile, p) for p in paths) == pytest.approx(1.0, abs=1e-12)

    def test_simulated_endpoints_match_exact_law(self):
        profile = WeightProfile(alpha=0.5, beta=1, delta=1)
        n, replicas = 10, 20_000
        exact = distribution_of_position(profile, n)
        rng = np.random.default_rng(2024)
        counts = {x: 0 for x in exact}
        for _ in range(replicas):
            counts[simulate(profile, n, checkpoints=[], rng=rng).final_position] += 1
        # pool thin bins so every expected count is at least 5
        observed, expected, pool_o, pool_e = [], [], 0, 0.0
        for x, p in exact.items():
            if p * replicas >= 5:
                observed.append(counts[x])
                expected.append(p * replicas)
            else:
                pool_o += counts[x]
                pool_e += p * replicas
        if pool_e > 0:
            observed.append(pool_o)
            expected.append(pool_e)
        assert stats.chisquare(observed, expected).pvalue > 1e-4


class TestSimulate:
    def test_first_step(self, unit_profile):
        stats_ = simulate(unit_profile, 1, rng=3)
        assert stats_.running_max[0].max_position == 1
        assert stats_.returns_to_origin == 0

    def test_zero_steps(self, unit_profile):
        stats_ = simulate(unit_profile, 0, hit_levels=[0, 2], rng=3)
        assert stats_.running_max == []
        assert stats_.first_hit == {0: 0, 2: None}

    def test_negative_steps_rejected(self, unit_profile):
        with pytest.raises(ValueError):
            simulate(unit_profile, -1)

    def test_deterministic_for_a_seed(self, unit_profile):
        a = simulate(unit_profile, 5000, hit_levels=[3, 10], rng=42)
        b = simulate(unit_profile, 5000, hit_levels=[3, 10], rng=42)
        assert a == b

    def test_checkpoints_and_invariants(self, unit_profile):
        s = simulate(unit_profile, 4096, hit_levels=[1, 2, 4, 8], rng=9)
        assert [c.n for c in s.running_max] == geometric_checkpoints(4096)
        maxima = [c.max_position for c in s.running_max]
        assert maxima == sorted(maxima)
        assert all(c.position <= c.max_position and c.position % 2 == c.n % 2 for c in s.running_max)
        hits = [t for t in s.first_hit.values() if t is not None]
        assert hits == sorted(hits)
        assert s.first_hit[1] == 1

    def test_continuation_equals_single_run(self, unit_profile):
        rng = np.random.default_rng(77)
        marks = [500, 1000, 2000]
        state = ReinforcedState()
        first = simulate(unit_profile, 700, checkpoints=marks, rng=rng, state=state)
        second = simulate(unit_profile, 1300, checkpoints=marks, rng=rng, state=state)
        single, whole = simulate_with_state(unit_profile, 2000, rng=np.random.default_rng(77), checkpoints=marks)
        assert [c.n for c in first.running_max] == [500]
        assert [c.n for c in second.running_max] == [1000, 2000]
        assert first.running_max + second.running_max == single.running_max
        assert state.position == whole.position
        assert state.edge_counts == whole.edge_counts
        assert state.step == 2000

    def test_returns_to_origin_counted(self, flat_walk):
        s = simulate(flat_walk, 10_000, rng=1)
        assert s.returns_to_origin > 0

    def test_flat_walk_hitting_time_of_five(self, flat_walk):
        rng = np.random.default_rng(123)
        hits = [simulate(flat_walk, 400, checkpoints=[], hit_levels=[5], rng=rng).first_hit[5] for _ in range(4000)]
        assert None not in hits
        taus = np.array(hits, dtype=np.float64)
        se = taus.std(ddof=1) / math.sqrt(taus.size)
        assert abs(taus.mean() - 25.0) < 4 * se

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1), n=st.integers(min_value=1, max_value=400))
    def test_edge_counts_sum_to_steps(self, seed, n):
        profile = WeightProfile(alpha=0.5, beta=1, delta=1)
        _, state = simulate_with_state(profile, n, rng=seed)
        assert sum(state.edge_counts.values()) == n
        assert state.position % 2 == n % 2


def test_geometric_checkpoints():
    assert geometric_checkpoints(0) == []
    assert geometric_checkpoints(1) == [1]
    assert geometric_checkpoints(10) == [1, 2, 4, 8, 10]
    assert geometric_checkpoints(8) == [1, 2, 4, 8]
