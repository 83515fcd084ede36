import math

import numpy as np
import pytest

from reinforced.environment import (
    BLOCK_SIZE,
    Environment,
    annealed_path_probability,
    beta_shapes,
    log_annealed_path_probability,
    log_gamma_variates,
    quenched_path_probability,
    quenched_step_weights,
    s_statistics,
    sample_environment,
    sample_hitting_times,
    sample_s_values,
    simulate_in_environment,
)
from reinforced.exceptions import DomainError, InvalidPathError
from reinforced.lerrw import path_probability
from reinforced.resistance import WeightSequence, expected_hitting_time
from reinforced.weights import WeightProfile


class TestBetaShapes:
    def test_first_site(self, unit_profile):
        a, b = beta_shapes(unit_profile, np.array([1]))
        assert (a[0], b[0]) == (0.5, 1.0)

    def test_rejects_unreinforced(self, flat_walk):
        with pytest.raises(DomainError):
            beta_shapes(flat_walk, np.array([1]))

    def test_rejects_origin(self, unit_profile):
        with pytest.raises(ValueError):
            beta_shapes(unit_profile, np.array([0, 1]))


class TestGammaRatioSampler:
    @pytest.mark.parametrize("a, b", [(0.5, 1.0), (0.02, 0.6), (3.0, 7.5)])
    def test_beta_mean(self, a, b):
        rng = np.random.default_rng(31)
        n = 10**6
        lga = log_gamma_variates(rng, np.full(n, a))
        lgb = log_gamma_variates(rng, np.full(n, b))
        p = np.exp(lga - np.logaddexp(lga, lgb))
        se = math.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)) / n)
        assert abs(p.mean() - a / (a + b)) < 4 * se

    def test_tiny_shapes_stay_finite(self):
        lg = log_gamma_variates(np.random.default_rng(0), np.full(10_000, 1e-4))
        assert np.all(np.isfinite(lg))


class TestSampleEnvironment:
    def test_deterministic(self, unit_profile):
        a = sample_environment(unit_profile, 2500, seed=9)
        b = sample_environment(unit_profile, 2500, seed=9)
        np.testing.assert_array_equal(a.log_p, b.log_p)

    def test_prefix_consistent_across_sizes(self, unit_profile):
        small = sample_environment(unit_profile, 100, seed=9)
        large = sample_environment(unit_profile, 3 * BLOCK_SIZE + 7, seed=9)
        np.testing.assert_array_equal(small.log_p, large.log_p[:100])
        np.testing.assert_array_equal(small.extended(large.x_max).log_q, large.log_q)

    def test_probabilities_inside_unit_interval(self):
        env = sample_environment(WeightProfile(alpha=-1, beta=2, delta=3), 2000, seed=4)
        assert np.all(env.log_p <= 0) and np.all(env.log_q <= 0)
        assert np.all(np.isfinite(env.log_s))

    def test_prefix_identity(self, unit_profile):
        env = sample_environment(unit_profile, 500, seed=2)
        direct = np.cumsum(np.log1p(-env.p) - np.log(env.p))
        np.testing.assert_allclose(env.log_s, direct, rtol=1e-10, atol=1e-10)
        assert env.s(0) == 0.0 and env.s(500) == env.log_s[-1]

    def test_rejects_unreinforced(self, flat_walk):
        with pytest.raises(DomainError):
            sample_environment(flat_walk, 10, seed=0)

    def test_imported_environment_cannot_grow(self, unit_profile):
        env = Environment.from_probabilities(unit_profile, [0.5, 0.5])
        with pytest.raises(ValueError):
            env.extended(10)

    @pytest.mark.parametrize("p", [[0.5, 0.0], [0.5, 1.0], [1.5]])
    def test_rejects_degenerate_probabilities(self, unit_profile, p):
        with pytest.raises(ValueError):
            Environment.from_probabilities(unit_profile, p)

    def test_csv_replay(self, unit_profile, tmp_path):
        env = sample_environment(unit_profile, 300, seed=12)
        path = env.to_csv(tmp_path / "env.csv")
        assert path.read_text().splitlines()[0] == "i,p,S"
        back = Environment.from_csv(path, unit_profile)
        np.testing.assert_allclose(back.p, env.p, rtol=1e-15)
        np.testing.assert_allclose(back.log_s, env.log_s, rtol=1e-9, atol=1e-9)


class TestQuenchedWeights:
    def test_fair_environment_gives_unit_weights(self, unit_profile):
        w = quenched_step_weights(Environment.from_probabilities(unit_profile, [0.5] * 6))
        np.testing.assert_array_equal(w.weights, np.ones(7))

    def test_single_site(self, unit_profile):
        w = quenched_step_weights(Environment.from_probabilities(unit_profile, [1 / 3]))
        assert w.weights[1] == pytest.approx(0.5, rel=1e-14)

    def test_round_trip(self, unit_profile):
        env = sample_environment(unit_profile, 200, seed=5)
        p = quenched_step_weights(env).step_right_probabilities()
        assert p[0] == 1.0
        np.testing.assert_allclose(p[1:], env.p, rtol=1e-12)


class TestAnnealedPathProbability:
    @pytest.mark.parametrize("path, expected", [([0], 1.0), ([0, 1, 0], 2 / 3), ([0, 1, 2], 1 / 3)])
    def test_hand_worked(self, unit_profile, path, expected):
        assert annealed_path_probability(unit_profile, path) == pytest.approx(expected, rel=1e-13)

    def test_left_step_at_origin_has_zero_mass(self, unit_profile):
        assert annealed_path_probability(unit_profile, [0, 1, 0, -1]) == 0.0
        assert log_annealed_path_probability(unit_profile, [0, -1]) == -math.inf

    @pytest.mark.parametrize("path", [[0, 2], [1, 0], []])
    def test_invalid(self, unit_profile, path):
        with pytest.raises(InvalidPathError):
            annealed_path_probability(unit_profile, path)

    def test_rejects_unreinforced(self, flat_walk):
        with pytest.raises(DomainError):
            annealed_path_probability(flat_walk, [0, 1])

    def test_depends_only_on_crossing_counts(self, unit_profile):
        a = [0, 1, 2, 1, 0, 1, 2, 3, 2]
        b = [0, 1, 0, 1, 2, 3, 2, 1, 2]
        assert annealed_path_probability(unit_profile, a) == pytest.approx(
            annealed_path_probability(unit_profile, b), rel=1e-14
        )

    def test_matches_reinforced_walk_on_a_long_path(self):
        profile = WeightProfile(alpha=0.5, beta=-1, delta=0.7)
        rng = np.random.default_rng(8)
        path = [0]
        for _ in range(60):
            x = path[-1]
            path.append(x + 1 if x == 0 or rng.random() < 0.55 else x - 1)
        assert log_annealed_path_probability(profile, path) == pytest.approx(
            math.log(path_probability(profile, path)), rel=1e-10
        )


class TestQuenchedPathProbability:
    def test_product_along_the_path(self, unit_profile):
        env = Environment.from_probabilities(unit_profile, [0.3, 0.6, 0.8])
        assert quenched_path_probability(env, [0, 1, 2, 1]) == pytest.approx(0.3 * 0.4)
        assert quenched_path_probability(env, [0, 1, 0, 1]) == pytest.approx(0.7)

    def test_beyond_environment(self, unit_profile):
        env = Environment.from_probabilities(unit_profile, [0.3, 0.6, 0.8])
        with pytest.raises(ValueError):
            quenched_path_probability(env, [0, 1, 2, 3, 4, 5])


class TestSStatistics:
    def test_values_do_not_depend_on_other_targets(self, unit_profile):
        both = sample_s_values(unit_profile, [50, 200], n_envs=300, master_seed=1)
        alone = sample_s_values(unit_profile, [200], n_envs=300, master_seed=1)
        np.testing.assert_array_equal(both[:, 1], alone[:, 0])

    def test_single_environment_law_of_large_numbers(self):
        profile = WeightProfile(alpha=0, beta=-1, delta=1)
        stats = s_statistics(profile, 10**6, n_envs=1, master_seed=3)
        assert stats.sample_var is None and stats.mean_z is None
        assert abs(stats.slln_ratios[0] - 1) < 0.01

    @pytest.mark.slow
    def test_moments_against_closed_forms(self, unit_profile):
        stats = s_statistics(unit_profile, 200, n_envs=10**5, master_seed=17)
        assert abs(stats.mean_z) < 4
        assert abs(stats.var_z) < 4

    def test_small_ensemble_moments(self, unit_profile):
        stats = s_statistics(unit_profile, 20, n_envs=20_000, master_seed=4)
        assert abs(stats.mean_z) < 4
        assert abs(stats.var_z) < 4


class TestHittingTimes:
    def test_flat_walk_level_five(self):
        ht = sample_hitting_times(WeightSequence(np.zeros(10)), 5, n_walks=10**5, seed=6, horizon=2000)
        assert not ht.censored.any()
        se = ht.observed.std(ddof=1) / math.sqrt(ht.observed.size)
        assert abs(ht.observed.mean() - 25.0) < 4 * se

    def test_decreasing_weights_level_six(self):
        w = WeightSequence.from_profile(WeightProfile(alpha=-1, beta=-2, delta=0), 10)
        t6 = expected_hitting_time(w, 6)
        ht = sample_hitting_times(w, 6, n_walks=10**5, seed=6, horizon=int(100 * t6))
        se = ht.observed.std(ddof=1) / math.sqrt(ht.observed.size)
        assert ht.censored.sum() == 0
        assert abs(ht.observed.mean() - t6) < 4 * se

    def test_censoring(self):
        ht = sample_hitting_times(WeightSequence(np.zeros(100)), 50, n_walks=200, seed=1, horizon=10)
        assert ht.censored.all()
        assert ht.observed.size == 0

    def test_level_range(self):
        with pytest.raises(ValueError):
            sample_hitting_times(WeightSequence(np.zeros(5)), 7, n_walks=10, seed=0, horizon=10)


class TestSimulateInEnvironment:
    def test_grows_environment_when_outrun(self, unit_profile):
        env = sample_environment(unit_profile, 2, seed=3)
        stats, grown = simulate_in_environment(env, 5000, rng=11)
        assert grown.x_max >= stats.max_position
        np.testing.assert_array_equal(grown.log_p[:2], env.log_p)

    def test_deterministic(self, unit_profile):
        env = sample_environment(unit_profile, 64, seed=3)
        a, _ = simulate_in_environment(env, 3000, hit_levels=[4], rng=2)
        b, _ = simulate_in_environment(env, 3000, hit_levels=[4], rng=2)
        assert a == b

    def test_imported_environment_is_not_extended(self, unit_profile):
        env = Environment.from_probabilities(unit_profile, [0.99, 0.99, 0.99])
        with pytest.raises(ValueError):
            simulate_in_environment(env, 200, rng=0)
