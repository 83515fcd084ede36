"""The reinforced walk and the walk in a Beta environment have the same path law."""

import numpy as np
import pytest

from reinforced.oracle import DEFAULT_GRID, check_profile, quenched_average, run_oracle
from reinforced.weights import WeightProfile


class TestPathLawEquivalence:
    @pytest.mark.parametrize("profile", DEFAULT_GRID, ids=lambda p: f"{p.family.value}-{p.alpha}-{p.beta}-{p.delta}")
    def test_grid_profile_up_to_twelve_steps(self, profile):
        row = check_profile(profile, max_len=12)
        assert row.passed
        assert row.max_rel_error <= 1e-10
        assert row.normalization_error <= 1e-12

    def test_path_count(self, unit_profile):
        # lengths 0, 1, 2: [0]; [0,1]; [0,1,0] and [0,1,2]
        assert check_profile(unit_profile, max_len=2).n_paths == 4

    def test_large_delta_small_shapes(self):
        assert check_profile(WeightProfile(alpha=-2, beta=1, delta=8), max_len=10).passed

    def test_failure_is_reported(self, unit_profile, caplog):
        report = run_oracle([unit_profile], max_len=4, rel_tol=-1.0)
        assert not report.ok
        assert "failed" in caplog.text

    def test_csv(self, tmp_path):
        report = run_oracle(DEFAULT_GRID[:2], max_len=4)
        lines = report.to_csv(tmp_path / "oracle.csv").read_text().splitlines()
        assert lines[0] == "family,alpha,beta,delta,max_len,n_paths,max_rel_error,normalization_error,passed"
        assert len(lines) == 3
        assert all(line.endswith(",true") for line in lines[1:])


class TestQuenchedAverage:
    @pytest.mark.parametrize(
        "path",
        [
            [0, 1, 0],
            [0, 1, 2, 1, 2, 3],
            [0, 1, 2, 3, 2, 1, 0, 1, 2],
        ],
    )
    def test_average_over_environments(self, unit_profile, path):
        avg = quenched_average(unit_profile, path, n_envs=10**5, seed=21)
        assert avg.annealed > 0
        assert abs(avg.z) < 4

    def test_paths_that_never_leave_the_origin(self, unit_profile):
        avg = quenched_average(unit_profile, [0], n_envs=10, seed=0)
        assert avg.mean == avg.annealed == 1.0
        assert avg.z is None

    def test_deterministic(self, unit_profile):
        a = quenched_average(unit_profile, [0, 1, 2, 1], n_envs=1000, seed=3)
        b = quenched_average(unit_profile, [0, 1, 2, 1], n_envs=1000, seed=3)
        assert a == b
        assert np.isfinite(a.se)
