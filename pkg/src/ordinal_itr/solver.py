"""Dual fit of the duplicated weighted-hinge objective.

The primal problem (after dividing the penalized objective by 2 lambda) is

    min_f  1/2 ||f||^2 + C sum_m w_m phi(ytil_m f(xtil_m))

over duplicated rows ``m = (i, k)`` with weight ``w_m = |r_m| / pi_i`` and
box scale ``C = 1 / (2 lambda)``. Rows with non-negative reward pay the
ordinary hinge on their binary label; rows with negative reward pay the
flipped hinge, which is the ordinary hinge on the opposite label. Folding
the flip into an effective label ``ytil_m`` (the row label, negated when
the reward is negative) makes the dual a standard weighted-margin QP,

    max_v  sum v_m - 1/2 sum_mm' v_m v_m' ytil_m ytil_m' ktil(m, m')
    s.t.   0 <= v_m <= C w_m,   sum_m v_m ytil_m = 0,

with one equality constraint from the single free intercept of the
duplicated-space function. The multiplier ``v_m`` is reported as
``alpha_m`` on non-negative-reward rows and ``eta_m`` on negative-reward
rows, so the two families have disjoint support by construction.

The QP is solved by pairwise coordinate ascent on the maximal violating
pair (two multipliers move jointly along the equality constraint, clipped
to their boxes), which handles the box-plus-one-equality polytope exactly
and needs no external QP dependency. The inner loop is compiled with
numba; semantics are plain array arithmetic.

Intercepts are recovered afterwards per level by exact minimization of the
one-dimensional piecewise-linear weighted hinge sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import Dataset, FittedRule, KernelSpec
from .duplication import (
    DuplicatedData,
    base_kernel,
    duplicate,
    duplicate_partial,
    extended_gram,
)

__all__ = [
    "DualSolution",
    "SolverConfig",
    "decision_values",
    "duality_gap",
    "fit",
    "predict",
    "recover_coeffs_kernel",
    "recover_intercepts",
    "recover_slope_linear",
    "solve_dual",
]

_CURVATURE_FLOOR = 1e-12
_EIG_CHECK_MAX_ROWS = 200  # full eigenvalue check is cheap below this size


@dataclass(frozen=True)
class SolverConfig:
    """Dual-solver knobs.

    Attributes
    ----------
    C : float
        Box scale multiplying each row weight, > 0.
    kkt_tol : float
        Stop when the maximal pairwise stationarity violation drops below
        this (default 1e-5).
    max_iter : int or None
        Cap on pair updates; None means ``5000 * n_rows``, enough for the
        smallest-regularization cell of the standard tuning grid at
        n_rows = 600.
    seed : int
        Seed for the deterministic fallback scan used if the greedy pair
        ever yields a zero step.
    """

    C: float
    kkt_tol: float = 1e-5
    max_iter: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.C) or self.C <= 0:
            raise ValueError("C must be finite and > 0")
        if self.kkt_tol <= 0:
            raise ValueError("kkt_tol must be > 0")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class DualSolution:
    """Solution of the dual QP over duplicated rows.

    ``alpha`` holds the multipliers of non-negative-reward rows, ``eta``
    those of negative-reward rows; each is zero off its own support, so
    ``alpha * eta == 0`` elementwise. Feasibility certificates:
    ``0 <= alpha + eta <= C * weight`` and
    ``sum (alpha - eta) * label == equality_residual ~ 0``.

    ``objective_trace`` is the running dual objective recorded once per
    sweep (one sweep = n_rows pair updates), accumulated from per-step
    gains; it is non-decreasing. ``dual_objective`` is recomputed exactly
    at termination.
    """

    alpha: np.ndarray
    eta: np.ndarray
    dual_objective: float
    kkt_violation: float
    iterations: int
    converged: bool
    equality_residual: float
    objective_trace: np.ndarray


@njit(cache=True, nogil=True)
def _smo_loop(Q, y, upper, tol, max_iter, seed):  # pragma: no cover - compiled
    m = Q.shape[0]
    v = np.zeros(m)
    G = np.full(m, -1.0)  # gradient of 1/2 v'Qv - sum v at v = 0
    trace = np.zeros(max_iter // m + 3)
    n_trace = 1  # trace[0] = 0.0: objective at the zero start
    obj = 0.0
    it = 0
    kkt = 0.0
    converged = True
    while True:
        best_up = -1e300
        best_dn = 1e300
        i = -1
        j_dn = -1
        for t in range(m):
            s = -y[t] * G[t]
            if (y[t] > 0.0 and v[t] < upper[t]) or (y[t] < 0.0 and v[t] > 0.0):
                if s > best_up:
                    best_up = s
                    i = t
            if (y[t] > 0.0 and v[t] > 0.0) or (y[t] < 0.0 and v[t] < upper[t]):
                if s < best_dn:
                    best_dn = s
                    j = t
                    j_dn = t
        if i < 0 or j_dn < 0:
            kkt = 0.0
            converged = True
            break
        max_viol = best_up - best_dn
        kkt = max_viol if max_viol > 0.0 else 0.0
        if max_viol < tol:
            converged = True
            break
        if it >= max_iter:
            converged = False
            break

        # Second-order partner: among descent-eligible rows below best_up,
        # maximize the one-step gain (violation^2 / curvature). Stopping
        # above still uses the maximal violation, so the certificate is
        # unchanged; this only changes which pair moves.
        j = j_dn
        best_gain = -1.0
        viol = max_viol
        for t in range(m):
            if not ((y[t] > 0.0 and v[t] > 0.0) or (y[t] < 0.0 and v[t] < upper[t])):
                continue
            viol_t = best_up - (-y[t] * G[t])
            if viol_t <= 0.0:
                continue
            quad_t = Q[i, i] + Q[t, t] - 2.0 * y[i] * y[t] * Q[i, t]
            safe_t = quad_t if quad_t > _CURVATURE_FLOOR else _CURVATURE_FLOOR
            gain_t = viol_t * viol_t / safe_t
            if gain_t > best_gain:
                best_gain = gain_t
                j = t
                viol = viol_t

        quad = Q[i, i] + Q[j, j] - 2.0 * y[i] * y[j] * Q[i, j]
        safe_quad = quad if quad > _CURVATURE_FLOOR else _CURVATURE_FLOOR
        t_star = viol / safe_quad
        cap_i = (upper[i] - v[i]) if y[i] > 0.0 else v[i]
        cap_j = v[j] if y[j] > 0.0 else (upper[j] - v[j])
        cap = cap_i if cap_i < cap_j else cap_j
        step = t_star if t_star < cap else cap

        if step <= 0.0:
            # Strict membership makes both caps positive, so this path is
            # defensive only: scan partners from a seeded offset.
            found = False
            start = (seed + it * 2654435761) % m
            for off in range(m):
                q = (start + off) % m
                if q == i:
                    continue
                if not ((y[q] > 0.0 and v[q] > 0.0) or (y[q] < 0.0 and v[q] < upper[q])):
                    continue
                viol_q = best_up - (-y[q] * G[q])
                if viol_q < tol:
                    continue
                cap_q = v[q] if y[q] > 0.0 else (upper[q] - v[q])
                cap2 = cap_i if cap_i < cap_q else cap_q
                if cap2 <= 0.0:
                    continue
                quad2 = Q[i, i] + Q[q, q] - 2.0 * y[i] * y[q] * Q[i, q]
                safe2 = quad2 if quad2 > _CURVATURE_FLOOR else _CURVATURE_FLOOR
                st2 = viol_q / safe2
                step = st2 if st2 < cap2 else cap2
                if step > 0.0:
                    j = q
                    viol = viol_q
                    quad = quad2
                    cap = cap2
                    cap_j = cap_q
                    found = True
                    break
            if not found:
                converged = False
                break

        vi_new = v[i] + y[i] * step
        vj_new = v[j] - y[j] * step
        if step == cap:
            # land exactly on the binding bound
            if cap == cap_i:
                vi_new = upper[i] if y[i] > 0.0 else 0.0
            if cap == cap_j:
                vj_new = 0.0 if y[j] > 0.0 else upper[j]
        if vi_new < 0.0:
            vi_new = 0.0
        elif vi_new > upper[i]:
            vi_new = upper[i]
        if vj_new < 0.0:
            vj_new = 0.0
        elif vj_new > upper[j]:
            vj_new = upper[j]
        dvi = vi_new - v[i]
        dvj = vj_new - v[j]
        v[i] = vi_new
        v[j] = vj_new
        for t in range(m):
            G[t] += Q[t, i] * dvi + Q[t, j] * dvj

        gain = step * (viol - 0.5 * quad * step)
        if gain > 0.0:
            obj += gain
        it += 1
        if it % m == 0:
            trace[n_trace] = obj
            n_trace += 1
    trace[n_trace] = obj
    n_trace += 1
    return v, kkt, it, trace, n_trace, converged


def _effective_labels(rows: DuplicatedData) -> np.ndarray:
    """Label of the equivalent ordinary-hinge row: flipped where reward < 0."""
    return np.where(rows.reward_nonneg, rows.label, -rows.label).astype(float)


def solve_dual(rows: DuplicatedData, gram: np.ndarray, config: SolverConfig) -> DualSolution:
    """Maximize the dual over the box-and-equality polytope.

    Parameters
    ----------
    rows : DuplicatedData
        Duplicated sample; weights set the box as ``upper = C * weight``.
    gram : (m, m) ndarray
        Extended-kernel Gram matrix over the rows (base kernel plus the
        same-level indicator). Must be symmetric PSD; for small instances
        the smallest eigenvalue is checked against a -1e-8 floor and a
        1e-10 jitter is added if breached, larger instances rely on the
        construction plus the per-pair curvature floor.
    config : SolverConfig

    Returns
    -------
    DualSolution
        Best feasible iterate; ``converged`` is False when the iteration
        cap was hit first, with the residual in ``kkt_violation``.
    """
    m = len(rows)
    if not np.all(np.isfinite(rows.weight)) or np.any(rows.weight < 0):
        raise ValueError("row weights must be finite and non-negative")
    if m == 0:
        empty = np.zeros(0)
        return DualSolution(empty, empty.copy(), 0.0, 0.0, 0, True, 0.0, np.zeros(1))

    gram = np.ascontiguousarray(np.asarray(gram, dtype=float))
    if gram.shape != (m, m):
        raise ValueError("gram must be m-by-m for m duplicated rows")
    if not np.all(np.isfinite(gram)):
        raise ValueError("gram contains non-finite entries")
    scale = max(1.0, float(np.max(np.abs(gram))))
    if np.max(np.abs(gram - gram.T)) > 1e-8 * scale:
        raise ValueError("gram must be symmetric")
    if m <= _EIG_CHECK_MAX_ROWS:
        smallest = float(np.linalg.eigvalsh(gram)[0])
        if smallest < -1e-8 * scale:
            gram = gram + (1e-10 - smallest) * np.eye(m)

    upper = config.C * rows.weight
    ytil = _effective_labels(rows)
    Q = np.ascontiguousarray((ytil[:, None] * ytil[None, :]) * gram)
    max_iter = config.max_iter if config.max_iter is not None else 5000 * m

    v, kkt, iters, trace, n_trace, converged = _smo_loop(
        Q, ytil, upper, float(config.kkt_tol), int(max_iter), int(config.seed)
    )

    z = v * ytil
    dual_objective = float(np.sum(v) - 0.5 * (z @ (gram @ z)))
    alpha = np.where(rows.reward_nonneg, v, 0.0)
    eta = np.where(rows.reward_nonneg, 0.0, v)
    return DualSolution(
        alpha=alpha,
        eta=eta,
        dual_objective=dual_objective,
        kkt_violation=float(kkt),
        iterations=int(iters),
        converged=bool(converged),
        equality_residual=float(np.sum(z)),
        objective_trace=trace[:n_trace],
    )


def recover_slope_linear(dual: DualSolution, rows: DuplicatedData, data: Dataset) -> np.ndarray:
    """Slope of the linear rule: ``beta = sum_m (alpha_m - eta_m) a_m x_m``.

    Only the covariate block is returned; the implicit per-level offsets
    are superseded by the exact intercept recovery.
    """
    z = (dual.alpha - dual.eta) * rows.label
    return data.X[rows.base_index - 1].T @ z


def recover_coeffs_kernel(dual: DualSolution, rows: DuplicatedData) -> np.ndarray:
    """Per-subject kernel coefficients ``c_j = sum_k (alpha - eta) a`` over j's rows.

    The same-level indicator part of the extended kernel contributes only
    per-level constants, which the intercept recovery absorbs.
    """
    z = (dual.alpha - dual.eta) * rows.label
    return np.bincount(rows.base_index - 1, weights=z, minlength=rows.n_subjects)


def recover_intercepts(g_values: np.ndarray, rows: DuplicatedData, C: float):
    """Exact per-level intercepts for fixed shape values ``g``.

    For each level ``k``, minimizes the convex piecewise-linear function

        h_k(b) = sum_{rows m at level k} C w_m [1 - ytil_m (g_m + b)]_+

    by sorting the kink locations (``1 - g`` for effective label +1,
    ``-1 - g`` for -1) and walking the slope. Within a flat optimal
    interval the midpoint is returned; unbounded interval ends are clipped
    to ``+-(max|g| + 1)``, which contains every kink.

    Returns
    -------
    (b, degenerate) : ((K-1,) ndarray, (K-1,) ndarray of bool)
        Intercepts, and a mask marking levels where every row weight was
        zero (or no row existed), for which ``b_k = 0`` by convention.
    """
    g = np.asarray(g_values, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("g values must be finite")
    clip = float(np.max(np.abs(g))) + 1.0 if g.size else 1.0
    n_levels = rows.K - 1
    b = np.zeros(n_levels)
    degenerate = np.zeros(n_levels, dtype=bool)

    ytil = _effective_labels(rows)
    w_all = float(C) * rows.weight
    g_row = g[rows.base_index - 1]
    kinks_all = np.where(ytil > 0, 1.0 - g_row, -1.0 - g_row)

    for k in range(1, rows.K):
        mask = (rows.dup_index == k) & (w_all > 0)
        if not np.any(mask):
            degenerate[k - 1] = True
            continue
        order = np.argsort(kinks_all[mask], kind="stable")
        kinks = kinks_all[mask][order]
        w = w_all[mask][order]
        pos = ytil[mask][order] > 0
        # slope of h_k left of all kinks is -sum of positive-label weights;
        # each kink crossed adds its weight
        cum = np.cumsum(w) - np.sum(w[pos])
        first = int(np.argmax(cum >= 0))  # exists: cum[-1] = negative-label mass >= 0
        if cum[first] > 0:
            if first == 0 and not np.any(pos):
                # slope is zero on (-inf, first kink]: flat left tail
                left, right = -clip, kinks[0]
            else:
                left = right = kinks[first]
        else:
            left = kinks[first]
            right = kinks[first + 1] if first + 1 < kinks.size else clip
        b[k - 1] = 0.5 * (left + right)
    return b, degenerate


def fit(
    data: Dataset,
    lam: float,
    spec: KernelSpec,
    strategy: str = "full",
    *,
    kkt_tol: float = 1e-5,
    max_iter: int | None = None,
    seed: int = 0,
) -> FittedRule:
    """Fit an ordinal decision rule on ``data`` at regularization ``lam``.

    Pipeline: duplicate (full strategy keeps every row with the subject's
    reward; partial keeps ``r * I(a in {k, k+1})`` rows only), solve the
    dual with box scale ``C = 1 / (2 lam)``, recover the slope (linear
    kernel) or per-subject coefficients (gaussian kernel), then recover
    intercepts exactly. ``K = 2`` is the ordinary binary case.
    """
    if not np.isfinite(lam) or lam <= 0:
        raise ValueError("lam must be finite and > 0")
    if strategy not in ("full", "partial"):
        raise ValueError(f"unknown duplication strategy {strategy!r}")
    C = 1.0 / (2.0 * float(lam))
    rows = duplicate(data) if strategy == "full" else duplicate_partial(data)
    linear = spec.kind == "linear"

    if len(rows) == 0:
        # partial strategy can drop everything when all rewards are 0
        b = np.zeros(data.K - 1)
        degen = tuple([True] * (data.K - 1))
        if linear:
            return FittedRule("linear", data.K, lam, C, b, beta=np.zeros(data.p),
                              kkt_violation=0.0, intercept_degenerate=degen)
        return FittedRule("kernel", data.K, lam, C, b, kernel=spec,
                          support=np.zeros((0, data.p)), coeffs=np.zeros(0),
                          kkt_violation=0.0, intercept_degenerate=degen)

    gram = extended_gram(spec, data.X, rows)
    config = SolverConfig(C=C, kkt_tol=kkt_tol, max_iter=max_iter, seed=seed)
    dual = solve_dual(rows, gram, config)

    if linear:
        beta = recover_slope_linear(dual, rows, data)
        g = data.X @ beta
    else:
        coeffs = recover_coeffs_kernel(dual, rows)
        g = base_kernel(spec, data.X, data.X) @ coeffs
    b, degen = recover_intercepts(g, rows, C)

    if linear:
        return FittedRule(
            "linear", data.K, lam, C, b, beta=beta,
            kkt_violation=dual.kkt_violation, intercept_degenerate=tuple(degen),
        )
    return FittedRule(
        "kernel", data.K, lam, C, b, kernel=spec, support=data.X, coeffs=coeffs,
        kkt_violation=dual.kkt_violation, intercept_degenerate=tuple(degen),
    )


def decision_values(rule: FittedRule, X: np.ndarray) -> np.ndarray:
    """Shared shape ``g`` of the rule evaluated at the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != rule.p:
        raise ValueError(f"expected {rule.p} covariates, got {X.shape[1]}")
    if rule.kind == "linear":
        return X @ rule.beta
    if rule.support.shape[0] == 0:
        return np.zeros(X.shape[0])
    return base_kernel(rule.kernel, X, rule.support) @ rule.coeffs


def predict(rule: FittedRule, x) -> int | np.ndarray:
    """Predicted treatment ``1 + sum_k I(g(x) + b_k > 0)``.

    Accepts a single covariate vector (returns int) or a matrix of rows
    (returns an int array).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    g = decision_values(rule, x)
    margins = g[:, None] + rule.intercepts[None, :]
    pred = 1 + np.sum(margins > 0, axis=1)
    return int(pred[0]) if single else pred


def duality_gap(
    rows: DuplicatedData,
    gram: np.ndarray,
    dual: DualSolution,
    g_values: np.ndarray,
    intercepts: np.ndarray,
    C: float,
) -> float:
    """Relative gap between the recovered rule's primal objective and the dual.

    The primal counts the duplicated-space squared norm ``z' gram z``
    (``z = (alpha - eta) * label``) plus ``C``-scaled hinge losses at the
    recovered intercepts, relative to ``1 + |dual|``. Because the exact
    intercept step can only lower the loss term, a converged solve gives a
    non-positive gap; a clearly positive value means the dual stopped
    short.
    """
    z = (dual.alpha - dual.eta) * rows.label
    norm2 = float(z @ (gram @ z))
    ytil = _effective_labels(rows)
    f_vals = np.asarray(g_values, dtype=float)[rows.base_index - 1]
    f_vals = f_vals + np.asarray(intercepts, dtype=float)[rows.dup_index - 1]
    loss = float(np.sum(C * rows.weight * np.maximum(1.0 - ytil * f_vals, 0.0)))
    primal = 0.5 * norm2 + loss
    return (primal - dual.dual_objective) / (1.0 + abs(dual.dual_objective))
