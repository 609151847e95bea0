"""Treatment assignment models used to form inverse-propensity weights.

Three kinds: a known uniform assignment, the empirical marginal
frequencies, and a proportional-odds model

    P(A <= k | x) = expit(theta_k - x . gamma),   k = 1..K-1,

with strictly increasing cutpoints theta. The Newton fit keeps the
cutpoints ordered at every accepted iterate (projecting and flagging if
an update breaks order) and halves the step until the negative
log-likelihood decreases, so the recorded NLL trace is monotone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .core import Dataset

__all__ = [
    "PropensityModel",
    "empirical_propensity",
    "fit_proportional_odds",
    "uniform_propensity",
]

DEFAULT_FLOOR = 1e-6


@dataclass(frozen=True)
class PropensityModel:
    """Fitted assignment model; use :meth:`propensity` for IPW weights.

    ``kind`` is one of "uniform", "empirical", "proportional_odds".
    Marginal kinds carry ``probs`` (length K); the proportional-odds kind
    carries ``cutpoints`` (length K-1, strictly increasing) and ``gamma``.
    """

    kind: str
    K: int
    probs: np.ndarray | None = None
    cutpoints: np.ndarray | None = None
    gamma: np.ndarray | None = None
    converged: bool = True
    grad_norm: float = 0.0
    projected: bool = False
    nll_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.kind not in ("uniform", "empirical", "proportional_odds"):
            raise ValueError(f"unknown propensity kind {self.kind!r}")
        if self.K < 2:
            raise ValueError("need K >= 2")
        if self.kind == "proportional_odds":
            if self.cutpoints is None or self.gamma is None:
                raise ValueError("proportional_odds needs cutpoints and gamma")
            if len(self.cutpoints) != self.K - 1:
                raise ValueError("need K-1 cutpoints")
            if np.any(np.diff(self.cutpoints) <= 0):
                raise ValueError("cutpoints must be strictly increasing")
        else:
            if self.probs is None or len(self.probs) != self.K:
                raise ValueError("marginal model needs K class probabilities")
            if np.any(np.asarray(self.probs) < 0) or not np.isclose(np.sum(self.probs), 1.0):
                raise ValueError("class probabilities must be a distribution")

    def class_probabilities(self, X: np.ndarray) -> np.ndarray:
        """P(A = k | x) for every row of X and k = 1..K, shape (m, K)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        m = X.shape[0]
        if self.kind != "proportional_odds":
            return np.tile(np.asarray(self.probs, dtype=float), (m, 1))
        s = X @ self.gamma
        cum = expit(self.cutpoints[None, :] - s[:, None])
        cum = np.hstack([np.zeros((m, 1)), cum, np.ones((m, 1))])
        return np.diff(cum, axis=1)

    def propensity(self, X: np.ndarray, A: np.ndarray, floor: float = DEFAULT_FLOOR) -> np.ndarray:
        """P(A = a_i | x_i) per subject, floored away from 0 for weighting."""
        A = np.asarray(A)
        if np.any(A < 1) or np.any(A > self.K):
            raise ValueError("treatments must lie in 1..K")
        probs = self.class_probabilities(X)
        pi = probs[np.arange(len(A)), A - 1]
        return np.maximum(pi, floor)


def uniform_propensity(K: int) -> PropensityModel:
    """Known completely randomized assignment: every level probability 1/K."""
    return PropensityModel(kind="uniform", K=K, probs=np.full(K, 1.0 / K))


def empirical_propensity(data: Dataset) -> PropensityModel:
    """Marginal frequencies; every level must appear at least once."""
    counts = np.bincount(data.A, minlength=data.K + 1)[1:]
    missing = np.flatnonzero(counts == 0) + 1
    if missing.size:
        raise ValueError(f"treatment level(s) {missing.tolist()} never observed")
    return PropensityModel(kind="empirical", K=data.K, probs=counts / data.n)


def _po_nll_grad(theta, gamma, X, A, K):
    """NLL, gradient, and Hessian of the proportional-odds likelihood.

    Parameter vector order: (theta_1..theta_{K-1}, gamma_1..gamma_p). The
    per-subject probability is F(theta_a - s) - F(theta_{a-1} - s) with
    boundary CDF values 1 and 0. With u = theta_k - s depending linearly
    on the parameters through du = e_k (+) (-x), the chain rule gives

        d log P   = (f_hi du_hi - f_lo du_lo) / P
        d^2 log P = (f'_hi du_hi du_hi' - f'_lo du_lo du_lo') / P
                    - (d log P)(d log P)'

    where f = F(1-F) and f' = f(1-2F). Stacking du_hi and du_lo as dense
    (n, d) designs turns every sum into a small matmul.
    """
    n, p = X.shape
    d = K - 1 + p
    s = X @ gamma
    hi = A - 1  # 0-based index of theta_a, out of range when A == K
    lo = A - 2  # 0-based index of theta_{a-1}, out of range when A == 1
    has_hi = A < K
    has_lo = A > 1

    F_hi = np.ones(n)
    F_hi[has_hi] = expit(theta[hi[has_hi]] - s[has_hi])
    F_lo = np.zeros(n)
    F_lo[has_lo] = expit(theta[lo[has_lo]] - s[has_lo])
    P = np.maximum(F_hi - F_lo, 1e-300)
    nll = -float(np.sum(np.log(P)))

    f_hi = np.where(has_hi, F_hi * (1.0 - F_hi), 0.0)
    f_lo = np.where(has_lo, F_lo * (1.0 - F_lo), 0.0)
    fp_hi = f_hi * (1.0 - 2.0 * F_hi)  # derivative of f at the upper cutpoint
    fp_lo = f_lo * (1.0 - 2.0 * F_lo)

    D_hi = np.zeros((n, d))
    D_hi[np.flatnonzero(has_hi), hi[has_hi]] = 1.0
    D_hi[:, K - 1 :] = -X
    D_lo = np.zeros((n, d))
    D_lo[np.flatnonzero(has_lo), lo[has_lo]] = 1.0
    D_lo[:, K - 1 :] = -X

    R = (f_hi / P)[:, None] * D_hi - (f_lo / P)[:, None] * D_lo
    grad = -R.sum(axis=0)
    H_log = (
        D_hi.T @ ((fp_hi / P)[:, None] * D_hi)
        - D_lo.T @ ((fp_lo / P)[:, None] * D_lo)
        - R.T @ R
    )
    return nll, grad, -H_log


def _project_increasing(theta: np.ndarray) -> tuple[np.ndarray, bool]:
    """L2-project onto the ordered cone (pool adjacent violators), then
    separate any pooled ties by a tiny strictly increasing offset."""
    if np.all(np.diff(theta) > 0):
        return theta, False
    vals = theta.astype(float)
    m = len(vals)
    # Classic PAVA on blocks.
    blocks_v, blocks_w = [], []
    for i in range(m):
        blocks_v.append(vals[i])
        blocks_w.append(1.0)
        while len(blocks_v) > 1 and blocks_v[-2] >= blocks_v[-1]:
            v = (blocks_v[-2] * blocks_w[-2] + blocks_v[-1] * blocks_w[-1]) / (
                blocks_w[-2] + blocks_w[-1]
            )
            w = blocks_w[-2] + blocks_w[-1]
            blocks_v = blocks_v[:-2] + [v]
            blocks_w = blocks_w[:-2] + [w]
    out = np.concatenate([np.full(int(w), v) for v, w in zip(blocks_v, blocks_w)])
    eps = 1e-8 * max(1.0, float(np.max(np.abs(out))))
    out = out + eps * np.arange(m)
    return out, True


def fit_proportional_odds(
    X: np.ndarray,
    A: np.ndarray,
    K: int,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> PropensityModel:
    """Damped Newton fit of the proportional-odds model.

    Starts from the empirical cumulative logits with gamma = 0, solves the
    Newton system (ridged if singular), and halves the step up to 50 times
    until the NLL strictly decreases; candidate cutpoints are re-ordered
    by isotonic projection when an update breaks monotonicity. Stops when
    the gradient infinity norm drops below ``tol``. Requires every level
    observed and n > p + K - 1.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    A = np.asarray(A, dtype=np.int64)
    n, p = X.shape
    if len(A) != n:
        raise ValueError("X and A disagree on n")
    if np.any(A < 1) or np.any(A > K):
        raise ValueError("treatments must lie in 1..K")
    counts = np.bincount(A, minlength=K + 1)[1:]
    if np.any(counts == 0):
        raise ValueError("every treatment level must be observed")
    if n <= p + K - 1:
        raise ValueError("need n > p + K - 1 observations")

    cum = np.cumsum(counts)[:-1] / n
    theta = np.log(cum / (1.0 - cum))
    gamma = np.zeros(p)
    projected_any = False
    nll, grad, H = _po_nll_grad(theta, gamma, X, A, K)
    trace = [nll]
    converged = False
    for _ in range(max_iter):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm < tol:
            converged = True
            break
        step = None
        ridge = 0.0
        for _attempt in range(6):
            try:
                step = np.linalg.solve(H + ridge * np.eye(H.shape[0]), -grad)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                break
            ridge = 1e-8 if ridge == 0.0 else ridge * 100.0
        if step is None or not np.all(np.isfinite(step)):
            break
        accepted = False
        tau = 1.0
        for _half in range(51):
            cand_theta = theta + tau * step[: K - 1]
            cand_gamma = gamma + tau * step[K - 1 :]
            cand_theta, proj = _project_increasing(cand_theta)
            cand = _po_nll_grad(cand_theta, cand_gamma, X, A, K)
            if np.isfinite(cand[0]) and cand[0] < nll:
                theta, gamma = cand_theta, cand_gamma
                nll, grad, H = cand
                projected_any = projected_any or proj
                trace.append(nll)
                accepted = True
                break
            tau *= 0.5
        if not accepted:
            break
    gnorm = float(np.max(np.abs(grad)))
    return PropensityModel(
        kind="proportional_odds",
        K=K,
        cutpoints=theta,
        gamma=gamma,
        converged=converged or gnorm < tol,
        grad_norm=gnorm,
        projected=projected_any,
        nll_trace=np.asarray(trace),
    )
