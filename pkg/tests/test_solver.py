"""Dual QP solver, slope/intercept recovery, and fitted-rule behavior."""

import numpy as np
import pytest

from ordinal_itr import Dataset, KernelSpec, SolverConfig
from ordinal_itr.duplication import duplicate, duplicate_partial, extended_gram
from ordinal_itr.solver import (
    decision_values,
    duality_gap,
    fit,
    predict,
    recover_intercepts,
    recover_slope_linear,
    solve_dual,
)

from oracles import (
    dual_objective,
    hinge_in_intercept,
    min_hinge_in_intercept,
    random_dataset,
    random_kernel_spec,
)


def two_point_problem():
    """K=2 toy whose dual reduces to max 2t - 2t^2 on [0, 2].

    Rows: (x=+1, a=2) labeled +1 and (x=-1, a=1) labeled -1, both with
    weight 2 (reward 1, propensity 1/2). The equality constraint forces
    equal multipliers t, so the optimum is t = 1/2, objective 1/2,
    slope beta = 1, intercept b = 0 (the hinge in b is 2|b|).
    """
    return Dataset(
        X=np.array([[1.0], [-1.0]]),
        A=np.array([2, 1]),
        R=np.array([1.0, 1.0]),
        propensity=np.array([0.5, 0.5]),
        K=2,
    )


class TestSolverConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(C=0.0),
            dict(C=-1.0),
            dict(C=np.inf),
            dict(C=1.0, kkt_tol=0.0),
            dict(C=1.0, max_iter=0),
        ],
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)


class TestSolveDual:
    def test_two_point_problem_solved_exactly(self):
        d = two_point_problem()
        rows = duplicate(d)
        gram = extended_gram(KernelSpec("linear"), d.X, rows)
        sol = solve_dual(rows, gram, SolverConfig(C=1.0))
        assert sol.converged
        assert sol.alpha == pytest.approx([0.5, 0.5], abs=1e-6)
        assert sol.eta.tolist() == [0.0, 0.0]
        assert sol.dual_objective == pytest.approx(0.5, abs=1e-8)
        assert abs(sol.equality_residual) < 1e-10

    def test_all_zero_rewards_give_zero_solution(self):
        d = Dataset(
            X=np.array([[1.0], [2.0]]),
            A=np.array([1, 2]),
            R=np.array([0.0, 0.0]),
            propensity=np.array([0.5, 0.5]),
            K=2,
        )
        rows = duplicate(d)
        gram = extended_gram(KernelSpec("linear"), d.X, rows)
        sol = solve_dual(rows, gram, SolverConfig(C=2.0))
        assert sol.converged
        assert sol.dual_objective == 0.0
        assert np.all(sol.alpha == 0) and np.all(sol.eta == 0)

    def test_reported_objective_matches_direct_evaluation(self):
        rng = np.random.default_rng(3)
        d = random_dataset(rng, n=10, K=3, p=2)
        rows = duplicate(d)
        gram = extended_gram(KernelSpec("gaussian", sigma=1.0), d.X, rows)
        sol = solve_dual(rows, gram, SolverConfig(C=0.7))
        ytil = np.where(rows.reward_nonneg, rows.label, -rows.label).astype(float)
        v = sol.alpha + sol.eta
        assert sol.dual_objective == pytest.approx(
            dual_objective(v, ytil, gram), abs=1e-10
        )

    def test_multiplier_split_by_reward_sign(self):
        rng = np.random.default_rng(4)
        d = random_dataset(rng, n=12, K=3, p=2, neg_fraction=0.5)
        rows = duplicate(d)
        gram = extended_gram(KernelSpec("linear"), d.X, rows)
        sol = solve_dual(rows, gram, SolverConfig(C=1.0))
        assert np.all(sol.alpha[~rows.reward_nonneg] == 0)
        assert np.all(sol.eta[rows.reward_nonneg] == 0)
        assert np.all(sol.alpha * sol.eta == 0)

    def test_box_and_equality_feasible(self):
        rng = np.random.default_rng(5)
        for trial in range(5):
            d = random_dataset(rng, n=15, K=int(rng.integers(2, 5)), p=3)
            rows = duplicate(d)
            C = float(rng.uniform(0.1, 5.0))
            gram = extended_gram(random_kernel_spec(rng), d.X, rows)
            sol = solve_dual(rows, gram, SolverConfig(C=C))
            v = sol.alpha + sol.eta
            assert np.all(v >= 0)
            assert np.all(v <= C * rows.weight + 1e-12)
            assert abs(sol.equality_residual) <= 1e-8 * max(1.0, v.sum())

    def test_objective_trace_non_decreasing(self):
        rng = np.random.default_rng(6)
        d = random_dataset(rng, n=20, K=3, p=3)
        rows = duplicate(d)
        gram = extended_gram(KernelSpec("linear"), d.X, rows)
        sol = solve_dual(rows, gram, SolverConfig(C=2.0))
        trace = sol.objective_trace
        assert trace.size >= 1
        assert np.all(np.diff(trace) >= -1e-9 * max(1.0, abs(trace[-1])))

    def test_iteration_cap_reports_non_convergence(self):
        rng = np.random.default_rng(7)
        d = random_dataset(rng, n=20, K=3, p=3)
        rows = duplicate(d)
        gram = extended_gram(KernelSpec("linear"), d.X, rows)
        sol = solve_dual(rows, gram, SolverConfig(C=5.0, max_iter=2))
        assert not sol.converged
        assert sol.kkt_violation > 1e-5
        v = sol.alpha + sol.eta
        assert np.all(v >= 0) and np.all(v <= 5.0 * rows.weight + 1e-12)

    def test_gram_validation(self):
        d = two_point_problem()
        rows = duplicate(d)
        with pytest.raises(ValueError):
            solve_dual(rows, np.zeros((3, 3)), SolverConfig(C=1.0))
        bad = np.array([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(ValueError):
            solve_dual(rows, bad, SolverConfig(C=1.0))
        with pytest.raises(ValueError):
            solve_dual(rows, np.array([[1.0, np.nan], [np.nan, 1.0]]), SolverConfig(C=1.0))

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        d = random_dataset(rng, n=15, K=3, p=2)
        rows = duplicate(d)
        gram = extended_gram(KernelSpec("linear"), d.X, rows)
        a = solve_dual(rows, gram, SolverConfig(C=1.5))
        b = solve_dual(rows, gram, SolverConfig(C=1.5))
        assert np.array_equal(a.alpha, b.alpha)
        assert a.dual_objective == b.dual_objective


class TestRecoverIntercepts:
    def _rows(self, labels, rewards, K=2, dup=None):
        n = len(labels)
        A = np.where(np.asarray(labels) > 0, 2, 1)
        d = Dataset(
            X=np.zeros((n, 1)),
            A=A,
            R=np.asarray(rewards, dtype=float),
            propensity=np.full(n, 0.5),
            K=K,
        )
        return duplicate(d)

    def test_balanced_flat_interval_returns_midpoint(self):
        # one +1 row and one -1 row at g = 0: flat minimum on [-1, 1]
        rows = self._rows([1, -1], [1.0, 1.0])
        b, degen = recover_intercepts(np.zeros(2), rows, C=1.0)
        assert b.tolist() == [0.0]
        assert not degen[0]

    def test_unbalanced_weights_pin_the_kink(self):
        # +1 weight 3 vs -1 weight 1: minimum exactly at the +1 kink b = 1
        rows = self._rows([1, -1], [1.5, 0.5])
        b, _ = recover_intercepts(np.zeros(2), rows, C=1.0)
        assert b.tolist() == [1.0]

    def test_single_positive_row_clips_right_tail(self):
        rows = self._rows([1], [1.0])
        b, _ = recover_intercepts(np.zeros(1), rows, C=1.0)
        assert b.tolist() == [1.0]  # flat on [1, clip=1]

    def test_single_negative_row_clips_left_tail(self):
        rows = self._rows([-1], [1.0])
        b, _ = recover_intercepts(np.zeros(1), rows, C=1.0)
        assert b.tolist() == [-1.0]

    def test_rowless_level_marked_degenerate(self):
        d = Dataset(
            X=np.zeros((2, 1)),
            A=np.array([1, 2]),
            R=np.array([1.0, 0.0]),
            propensity=np.array([0.5, 0.5]),
            K=3,
        )
        rows = duplicate_partial(d)  # boundary 2 loses its only (zero-reward) row
        b, degen = recover_intercepts(np.zeros(2), rows, C=1.0)
        assert degen.tolist() == [False, True]
        assert b[1] == 0.0

    def test_rejects_non_finite_g(self):
        rows = self._rows([1, -1], [1.0, 1.0])
        with pytest.raises(ValueError):
            recover_intercepts(np.array([np.nan, 0.0]), rows, C=1.0)

    def test_achieves_oracle_minimum_on_random_instances(self):
        rng = np.random.default_rng(9)
        for trial in range(20):
            d = random_dataset(rng, n=12, K=int(rng.integers(2, 5)), p=2)
            rows = duplicate(d)
            g = rng.normal(size=d.n)
            C = float(rng.uniform(0.2, 3.0))
            b, degen = recover_intercepts(g, rows, C)
            ytil = np.where(rows.reward_nonneg, rows.label, -rows.label)
            for k in range(1, d.K):
                m = rows.dup_index == k
                if degen[k - 1]:
                    continue
                got = hinge_in_intercept(
                    b[k - 1], g[rows.base_index[m] - 1], ytil[m],
                    C * rows.weight[m], np.ones(m.sum(), dtype=bool),
                )
                # oracle works on plain hinges of the effective label
                _, best = min_hinge_in_intercept(
                    g[rows.base_index[m] - 1], ytil[m],
                    C * rows.weight[m], np.ones(m.sum(), dtype=bool),
                )
                assert got <= best + 1e-9


class TestFit:
    def test_two_point_rule(self):
        d = two_point_problem()
        rule = fit(d, lam=0.5, spec=KernelSpec("linear"))  # C = 1
        assert rule.beta == pytest.approx([1.0], abs=1e-6)
        assert rule.intercepts == pytest.approx([0.0], abs=1e-6)
        assert predict(rule, np.array([0.5])) == 2
        assert predict(rule, np.array([-0.5])) == 1

    def test_rejects_bad_lam_and_strategy(self):
        d = two_point_problem()
        with pytest.raises(ValueError):
            fit(d, lam=0.0, spec=KernelSpec("linear"))
        with pytest.raises(ValueError):
            fit(d, lam=1.0, spec=KernelSpec("linear"), strategy="half")

    def test_records_C_as_half_inverse_lam(self):
        d = two_point_problem()
        rule = fit(d, lam=0.25, spec=KernelSpec("linear"))
        assert rule.C == pytest.approx(2.0)
        assert rule.lam == pytest.approx(0.25)

    def test_prediction_is_monotone_staircase(self):
        rng = np.random.default_rng(10)
        d = random_dataset(rng, n=30, K=4, p=2)
        rule = fit(d, lam=0.1, spec=KernelSpec("linear"))
        xs = np.linspace(-3, 3, 101)
        # walk along the beta direction: predictions must be non-decreasing
        line = xs[:, None] * rule.beta[None, :] / max(np.linalg.norm(rule.beta), 1e-12)
        preds = predict(rule, line)
        assert np.all(np.diff(preds) >= 0)

    def test_gaussian_decision_values_match_expansion(self):
        rng = np.random.default_rng(11)
        d = random_dataset(rng, n=15, K=3, p=2)
        spec = KernelSpec("gaussian", sigma=1.2)
        rule = fit(d, lam=0.2, spec=spec)
        Xq = rng.normal(size=(6, 2))
        manual = np.zeros(6)
        for j in range(rule.support.shape[0]):
            diff = Xq - rule.support[j]
            manual += rule.coeffs[j] * np.exp(
                -np.sum(diff**2, axis=1) / (2 * spec.sigma**2)
            )
        assert decision_values(rule, Xq) == pytest.approx(manual, abs=1e-10)

    def test_duality_gap_small_after_convergence(self):
        rng = np.random.default_rng(12)
        for trial in range(5):
            d = random_dataset(rng, n=20, K=3, p=3)
            spec = random_kernel_spec(rng)
            lam = float(rng.uniform(0.05, 2.0))
            rows = duplicate(d)
            gram = extended_gram(spec, d.X, rows)
            sol = solve_dual(rows, gram, SolverConfig(C=1 / (2 * lam)))
            assert sol.converged
            rule = fit(d, lam=lam, spec=spec)
            g = decision_values(rule, d.X)
            gap = duality_gap(rows, gram, sol, g, rule.intercepts, rule.C)
            assert gap <= 1e-3

    def test_all_zero_rewards_under_partial_strategy(self):
        d = Dataset(
            X=np.array([[1.0], [2.0]]),
            A=np.array([1, 2]),
            R=np.array([0.0, 0.0]),
            propensity=np.array([0.5, 0.5]),
            K=2,
        )
        rule = fit(d, lam=1.0, spec=KernelSpec("linear"), strategy="partial")
        assert rule.beta.tolist() == [0.0]
        assert rule.intercept_degenerate == (True,)
        assert predict(rule, d.X).tolist() == [1, 1]

    def test_deterministic_end_to_end(self):
        rng = np.random.default_rng(13)
        d = random_dataset(rng, n=25, K=3, p=3)
        r1 = fit(d, lam=0.1, spec=KernelSpec("linear"))
        r2 = fit(d, lam=0.1, spec=KernelSpec("linear"))
        assert np.array_equal(r1.beta, r2.beta)
        assert np.array_equal(r1.intercepts, r2.intercepts)

    def test_slope_matches_multiplier_formula(self):
        rng = np.random.default_rng(14)
        d = random_dataset(rng, n=18, K=3, p=4)
        rows = duplicate(d)
        gram = extended_gram(KernelSpec("linear"), d.X, rows)
        sol = solve_dual(rows, gram, SolverConfig(C=1.0))
        beta = recover_slope_linear(sol, rows, d)
        manual = np.zeros(d.p)
        for m, s in enumerate(rows):
            manual += (sol.alpha[m] - sol.eta[m]) * s.label * d.X[s.base_index - 1]
        assert beta == pytest.approx(manual, abs=1e-12)

    def test_predict_single_vector_returns_int(self):
        d = two_point_problem()
        rule = fit(d, lam=0.5, spec=KernelSpec("linear"))
        out = predict(rule, np.array([0.3]))
        assert isinstance(out, int)

    def test_decision_values_reject_wrong_dimension(self):
        d = two_point_problem()
        rule = fit(d, lam=0.5, spec=KernelSpec("linear"))
        with pytest.raises(ValueError):
            decision_values(rule, np.zeros((2, 3)))
