"""Scenario generators: mean structures, truth labels, reproducibility."""

import numpy as np
import pytest

from ordinal_itr.simulation import (
    SCENARIO_IDS,
    LabeledDataset,
    ScenarioConfig,
    derive_seed,
    generate,
    q_matrix,
    true_optimal,
)


class TestConfig:
    def test_ids_and_shapes(self):
        assert set(SCENARIO_IDS) == {
            "L2", "L3", "L5", "L7", "N2", "N3", "N5", "N7", "NP3",
        }
        assert (ScenarioConfig("L5", 10, 0).K, ScenarioConfig("L5", 10, 0).p) == (5, 6)
        assert (ScenarioConfig("NP3", 10, 0).K, ScenarioConfig("NP3", 10, 0).p) == (3, 2)

    def test_rejects_unknown_and_empty(self):
        with pytest.raises(ValueError):
            ScenarioConfig("L4", 10, 0)
        with pytest.raises(ValueError):
            ScenarioConfig("L2", 0, 0)


class TestQMatrix:
    def test_two_level_linear_hand_values(self):
        x = np.array([[-0.5, 0.1, 0.2, 0.3]])
        q = q_matrix("L2", x)
        # mu = 1 - 0.5 + 0.1 + 0.4 + 0.15 = 1.15; contrast = 1.8 * 0.7 = 1.26
        assert q[0] == pytest.approx([1.15 - 1.26, 1.15 + 1.26])

    def test_two_level_quadratic_hand_values(self):
        x = np.array([[0.5, -0.5, 0.2, 0.4]])
        q = q_matrix("N2", x)
        # mu = 1 + 0.25 + 0.25 - 0.4 + 0.2 = 1.3; contrast = 4 * 0.2 = 0.8
        assert q[0] == pytest.approx([0.5, 2.1])

    def test_staircase_steps_of_four(self):
        rng = np.random.default_rng(0)
        for sc in ("L3", "L5", "L7", "N3", "N5", "N7"):
            K = ScenarioConfig(sc, 1, 0).K
            X = rng.uniform(-1, 1, size=(50, 6))
            q = q_matrix(sc, X)
            best = np.argmax(q, axis=1)
            dist = np.abs(np.arange(K)[None, :] - best[:, None])
            drop = q[np.arange(50), best][:, None] - q
            assert drop == pytest.approx(4.0 * dist)

    def test_three_level_peak_sits_lower(self):
        # K=3 staircase peaks at mu + 3.5, K>=5 at mu + 8
        x = np.zeros((1, 6))
        mu = 2.0
        assert np.max(q_matrix("L3", x)) == pytest.approx(mu + 3.5)
        assert np.max(q_matrix("L5", x)) == pytest.approx(mu + 8.0)
        assert np.max(q_matrix("N3", x)) == pytest.approx(mu + 3.5)

    def test_region_scenario_hand_values(self):
        x = np.array([[0.8, 0.8]])
        q = q_matrix("NP3", x)
        # mu = 3 + 0.8 + 0.4 = 4.2, best arm 2, steps of two
        assert q[0] == pytest.approx([4.2 - 2.0, 4.2, 4.2 - 2.0])

    def test_wrong_dimension_rejected(self):
        with pytest.raises(ValueError):
            q_matrix("L3", np.zeros((2, 4)))
        with pytest.raises(ValueError):
            q_matrix("XX", np.zeros((2, 6)))


class TestTrueOptimal:
    def test_matches_q_argmax_everywhere(self):
        rng = np.random.default_rng(1)
        for sc in SCENARIO_IDS:
            cfg = ScenarioConfig(sc, 1, 0)
            X = rng.uniform(-1, 1, size=(200, cfg.p))
            best = true_optimal(cfg, X)
            assert np.array_equal(best, np.argmax(q_matrix(sc, X), axis=1) + 1)

    def test_region_scenario_points(self):
        cfg = ScenarioConfig("NP3", 1, 0)
        assert true_optimal(cfg, np.array([-0.9, -0.9])) == 1  # inside the disc
        assert true_optimal(cfg, np.array([0.8, 0.8])) == 2  # above the line
        assert true_optimal(cfg, np.array([0.0, -0.8])) == 3  # elsewhere

    def test_single_vector_returns_int(self):
        out = true_optimal(ScenarioConfig("L2", 1, 0), np.zeros(4))
        assert isinstance(out, int)


class TestGenerate:
    def test_reproducible_and_seed_sensitive(self):
        a = generate(ScenarioConfig("L3", 50, 3))
        b = generate(ScenarioConfig("L3", 50, 3))
        c = generate(ScenarioConfig("L3", 50, 4))
        assert np.array_equal(a.data.X, b.data.X)
        assert np.array_equal(a.data.R, b.data.R)
        assert not np.array_equal(a.data.R, c.data.R)

    def test_shapes_and_propensity(self):
        lab = generate(ScenarioConfig("N5", 40, 5))
        assert lab.data.X.shape == (40, 6)
        assert lab.data.K == 5
        assert np.all(lab.data.propensity == 0.2)
        assert lab.q_values.shape == (40, 5)
        assert set(np.unique(lab.data.A)) <= set(range(1, 6))

    def test_truth_is_unique_argmax(self):
        lab = generate(ScenarioConfig("L7", 300, 6))
        assert np.array_equal(lab.truth, np.argmax(lab.q_values, axis=1) + 1)
        top = np.max(lab.q_values, axis=1)
        runner = np.partition(lab.q_values, 5, axis=1)[:, 5]
        assert np.all(top > runner)

    def test_reward_is_mean_plus_unit_noise(self):
        lab = generate(ScenarioConfig("L2", 20000, 7))
        picked = lab.q_values[np.arange(20000), lab.data.A - 1]
        noise = lab.data.R - picked
        assert abs(noise.mean()) < 0.03
        assert abs(noise.std() - 1.0) < 0.03

    def test_three_level_positive_fraction_near_seventy_percent(self):
        lab = generate(ScenarioConfig("L3", 10000, 7))
        pos = float(np.mean(lab.data.R >= 0))
        assert 0.60 < pos < 0.80
        frac = np.bincount(lab.truth, minlength=4)[1:] / 10000
        assert np.all((frac > 0.15) & (frac < 0.55))

    def test_region_scenario_positive_fraction_near_seventy_percent(self):
        lab = generate(ScenarioConfig("NP3", 10000, 7))
        assert 0.60 < float(np.mean(lab.data.R >= 0)) < 0.80

    def test_covariates_uniform_on_unit_cube(self):
        lab = generate(ScenarioConfig("NP3", 5000, 8))
        assert lab.data.X.min() >= -1 and lab.data.X.max() <= 1
        assert abs(lab.data.X.mean()) < 0.02

    def test_labeled_dataset_validates_consistency(self):
        lab = generate(ScenarioConfig("L2", 10, 9))
        with pytest.raises(ValueError):
            LabeledDataset(data=lab.data, truth=lab.truth[::-1].copy(),
                           q_values=lab.q_values)
        with pytest.raises(ValueError):
            LabeledDataset(data=lab.data, truth=lab.truth,
                           q_values=np.zeros((10, 2)))


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(0, 3, 1) == derive_seed(0, 3, 1)

    def test_distinct_paths_differ(self):
        seen = {derive_seed(0, r, c) for r in range(20) for c in range(3)}
        assert len(seen) == 60

    def test_master_changes_everything(self):
        assert derive_seed(0, 1, 1) != derive_seed(1, 1, 1)
