"""Comparison methods: pairwise shifted-reward OWL and pairwise lasso.

Both baselines reduce the K-level problem to K-1 independent binary
sub-problems "levels {1..k} vs {k+1..K}" and recombine predictions by
summing indicators. Unlike the duplicated joint fit, the sub-problems
share nothing, so their boundaries may cross; the summed prediction is
still a valid level in {1..K}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, KernelSpec, sign
from .solver import decision_values as _rule_decision_values
from .solver import fit as _gowl_fit

__all__ = [
    "BaselineRule",
    "LassoResult",
    "PlsSubRule",
    "fit_owl",
    "fit_pls_l1",
    "lasso_coordinate_descent",
    "predict",
    "sub_decision_values",
]


@dataclass(frozen=True)
class PlsSubRule:
    """One pairwise regression sub-rule: decision value ``gamma + x . delta``.

    ``gamma`` is the coefficient of the treatment code ``t = sign(a - k)``
    and ``delta`` the coefficients of the ``t * x`` interaction block; the
    main-effect block cancels when comparing treatment codes +-1, so only
    the treatment-varying part enters the decision.
    """

    gamma: float
    delta: np.ndarray


@dataclass(frozen=True)
class BaselineRule:
    """K-1 independent binary sub-rules plus the recombination rule.

    Attributes
    ----------
    method : {"owl", "pls_l1"}
    K : int
    sub_rules : tuple
        Binary fitted rules (owl) or :class:`PlsSubRule` objects (pls_l1),
        ordered by boundary k = 1..K-1.
    shift : float
        Constant added to every reward before the owl fit (0 for pls_l1).
    lam : float
        Regularization used for every sub-fit.
    """

    method: str
    K: int
    sub_rules: tuple
    shift: float
    lam: float

    def __post_init__(self):
        if self.method not in ("owl", "pls_l1"):
            raise ValueError(f"unknown baseline method {self.method!r}")
        if len(self.sub_rules) != self.K - 1:
            raise ValueError("need exactly K-1 sub-rules")


def sub_decision_values(rule: BaselineRule, X: np.ndarray) -> np.ndarray:
    """Per-boundary decision values, shape (rows of X, K-1)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    cols = []
    for sub in rule.sub_rules:
        if rule.method == "owl":
            cols.append(_rule_decision_values(sub, X) + sub.intercepts[0])
        else:
            cols.append(sub.gamma + X @ sub.delta)
    return np.column_stack(cols)


def predict(rule: BaselineRule, x) -> int | np.ndarray:
    """Predicted treatment ``1 + sum_k I(sub-rule_k(x) > 0)``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    vals = sub_decision_values(rule, x)
    pred = 1 + np.sum(vals > 0, axis=1)
    return int(pred[0]) if single else pred


def fit_owl(data: Dataset, lam: float, spec: KernelSpec, shift_margin: float = 0.1) -> BaselineRule:
    """Pairwise weighted-margin fit on rewards shifted to be non-negative.

    Rewards become ``r' = r + max(0, -min(r)) + shift_margin * sd(r)``
    (population sd), so already-positive rewards are never shifted down;
    then each boundary k gets an independent binary fit on labels
    ``sign(a - k)`` with weights ``r' / propensity`` through the same dual
    solver (with every reward non-negative the flipped-hinge branch is
    never active, so this is the ordinary weighted hinge). The margin
    keeps the minimum reward strictly positive; 0 disables it, and
    constant rewards give sd = 0 so the fit proceeds with equal (zero
    after the shift) weights.
    """
    if shift_margin < 0:
        raise ValueError("shift_margin must be >= 0")
    shift = float(max(0.0, -np.min(data.R)) + shift_margin * np.std(data.R))
    shifted = data.R + shift
    subs = []
    for k in range(1, data.K):
        binary = Dataset(
            X=data.X,
            A=(data.A > k).astype(np.int64) + 1,
            R=shifted,
            propensity=data.propensity,
            K=2,
        )
        subs.append(_gowl_fit(binary, lam, spec))
    return BaselineRule(method="owl", K=data.K, sub_rules=tuple(subs), shift=shift, lam=float(lam))


@dataclass(frozen=True)
class LassoResult:
    """Solution of one penalized least-squares problem.

    ``intercept`` and ``coefs`` are on the original column scale;
    ``objective_trace`` holds the (standardized-problem) objective after
    each full coordinate cycle and decreases monotonically.
    """

    intercept: float
    coefs: np.ndarray
    objective_trace: np.ndarray
    n_cycles: int
    converged: bool


def lasso_coordinate_descent(
    Z: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = 1e-7,
    max_cycles: int = 10000,
) -> LassoResult:
    """Cyclic coordinate descent for ``(1/2n)||y - b0 - Z theta||^2 + lam ||theta||_1``.

    Columns are standardized internally (mean 0, population sd 1), the
    intercept is unpenalized, and results return on the original scale.
    Constant columns get coefficient 0. Convergence: the largest
    (standardized-scale) coefficient change in a full cycle drops below
    ``tol``. With a standardized column z the update is the soft threshold
    ``theta_j <- S(z . resid / n + theta_j, lam)``, so ``lam >=
    max|Z_std . y_c| / n`` yields the all-zero solution.
    """
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = Z.shape
    mu = Z.mean(axis=0)
    sd = Z.std(axis=0)
    active = sd > 0
    Zs = (Z[:, active] - mu[active]) / sd[active]
    y_bar = float(y.mean())
    resid = y - y_bar
    theta = np.zeros(int(active.sum()))
    trace = []
    converged = False
    cycle = 0
    for cycle in range(1, max_cycles + 1):
        max_delta = 0.0
        for j in range(theta.size):
            zj = Zs[:, j]
            rho = zj @ resid / n + theta[j]
            new = np.sign(rho) * max(abs(rho) - lam, 0.0)
            delta = new - theta[j]
            if delta != 0.0:
                resid = resid - zj * delta
                theta[j] = new
                max_delta = max(max_delta, abs(delta))
        trace.append(0.5 * (resid @ resid) / n + lam * np.sum(np.abs(theta)))
        if max_delta < tol:
            converged = True
            break
    coefs = np.zeros(d)
    coefs[active] = theta / sd[active]
    intercept = y_bar - float(mu @ coefs)
    return LassoResult(
        intercept=intercept,
        coefs=coefs,
        objective_trace=np.asarray(trace),
        n_cycles=cycle,
        converged=converged,
    )


def fit_pls_l1(data: Dataset, lambda_lasso: float) -> BaselineRule:
    """Pairwise penalized least squares with covariate-treatment interactions.

    For each boundary k, codes the treatment as ``t = sign(a - k)`` and
    regresses the reward on ``[1, x, t, t * x]`` with an l1 penalty
    (coordinate descent above). The sub-rule keeps only the
    treatment-varying part, ``gamma + x . delta`` from the ``t`` and
    ``t * x`` coefficients.
    """
    if data.n <= 2:
        raise ValueError("pairwise least squares needs n > 2")
    if lambda_lasso < 0:
        raise ValueError("lambda_lasso must be >= 0")
    p = data.p
    subs = []
    for k in range(1, data.K):
        t = sign(data.A - k).astype(float)
        Z = np.column_stack([data.X, t, t[:, None] * data.X])
        res = lasso_coordinate_descent(Z, data.R, lambda_lasso)
        subs.append(PlsSubRule(gamma=float(res.coefs[p]), delta=res.coefs[p + 1 :].copy()))
    return BaselineRule(
        method="pls_l1", K=data.K, sub_rules=tuple(subs), shift=0.0, lam=float(lambda_lasso)
    )
