"""Shared domain types, the sign convention, and the modified hinge loss.

Everything downstream (duplication, the dual solver, baselines, metrics)
builds on the three objects defined here: an immutable :class:`Dataset`
of (covariates, ordinal treatment, reward, propensity) rows, a
:class:`KernelSpec` naming the decision-function space, and a
:class:`FittedRule` holding a shared shape ``g`` plus per-level intercepts
so that the K-1 decision boundaries never cross.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "FittedRule",
    "KernelSpec",
    "modified_hinge",
    "sign",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    """Return a C-contiguous, write-protected copy of ``a``."""
    out = np.array(a, copy=True, order="C")
    out.flags.writeable = False
    return out


def sign(u):
    """Two-valued sign: +1 where ``u > 0``, -1 otherwise (zero included).

    Zero mapping to -1 is load-bearing: the duplicated binary label of a
    subject at its own treatment level is ``sign(a - k) = sign(0) = -1``,
    which places the observed level on the "at most k" side.

    Parameters
    ----------
    u : float or array_like
        Finite value(s).

    Returns
    -------
    int or ndarray of int
        +1 or -1, matching the shape of ``u``.
    """
    arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("sign requires finite input")
    out = np.where(arr > 0, 1, -1)
    return int(out) if out.ndim == 0 else out


def modified_hinge(u, r):
    """Reward-direction hinge: ``[1-u]_+`` if ``r >= 0`` else ``[1+u]_+``.

    ``u`` is a margin (label times decision value). A non-negative reward
    keeps the ordinary hinge, pulling the fit toward reproducing the
    observed treatment; a negative reward flips the hinge so that
    reproducing the observed treatment is exactly what gets penalized.
    Ties at ``r = 0`` take the non-negative branch.

    Broadcasts over array inputs.

    Returns
    -------
    float or ndarray
        Non-negative loss, convex and piecewise linear in ``u`` with a
        single kink at ``u = 1`` (``r >= 0``) or ``u = -1`` (``r < 0``).
    """
    u_arr = np.asarray(u, dtype=float)
    r_arr = np.asarray(r, dtype=float)
    if not (np.all(np.isfinite(u_arr)) and np.all(np.isfinite(r_arr))):
        raise ValueError("modified_hinge requires finite margin and reward")
    loss = np.where(
        r_arr >= 0,
        np.maximum(1.0 - u_arr, 0.0),
        np.maximum(1.0 + u_arr, 0.0),
    )
    return float(loss) if loss.ndim == 0 else loss


@dataclass(frozen=True)
class KernelSpec:
    """Kernel for the shared shape ``g`` of a decision rule.

    ``kind="linear"`` uses ``k(x, y) = x . y``; ``kind="gaussian"`` uses
    ``k(x, y) = exp(-||x - y||^2 / (2 sigma^2))`` with bandwidth ``sigma``.

    Attributes
    ----------
    kind : {"linear", "gaussian"}
    sigma : float, optional
        Bandwidth, required (finite, > 0) for the gaussian kernel and
        disallowed for the linear kernel.
    """

    kind: str
    sigma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "gaussian"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.sigma is None:
                raise ValueError("gaussian kernel requires a bandwidth sigma")
            if not np.isfinite(self.sigma) or self.sigma <= 0:
                raise ValueError("gaussian bandwidth must be finite and > 0")
            object.__setattr__(self, "sigma", float(self.sigma))
        elif self.sigma is not None:
            raise ValueError("linear kernel takes no bandwidth")


@dataclass(frozen=True)
class Dataset:
    """Immutable study data: covariates, ordinal treatments, rewards.

    Attributes
    ----------
    X : (n, p) ndarray
        Covariate rows.
    A : (n,) ndarray of int
        Observed treatments, each in ``{1, ..., K}``.
    R : (n,) ndarray
        Clinical reward, larger is better. Stored and used exactly as
        given: nothing here ever re-centers or shifts rewards.
    propensity : (n,) ndarray
        ``P(A = a_i | x_i)``, each in ``(0, 1]``.
    K : int
        Number of ordered treatment levels, >= 2.
    """

    X: np.ndarray
    A: np.ndarray
    R: np.ndarray
    propensity: np.ndarray
    K: int

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("X must be a non-empty 2-D matrix")
        n = X.shape[0]

        A_raw = np.asarray(self.A)
        A = A_raw.astype(np.int64)
        if A.shape != (n,) or not np.all(A == np.asarray(A_raw, dtype=float)):
            raise ValueError("A must be a length-n vector of integers")

        R = np.asarray(self.R, dtype=float)
        pi = np.asarray(self.propensity, dtype=float)
        if R.shape != (n,) or pi.shape != (n,):
            raise ValueError("R and propensity must be length-n vectors")

        K = int(self.K)
        if K < 2:
            raise ValueError("K must be at least 2")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(R)) and np.all(np.isfinite(pi))):
            raise ValueError("dataset contains non-finite entries")
        if A.min() < 1 or A.max() > K:
            raise ValueError(f"treatments must lie in 1..{K}")
        if np.any(pi <= 0) or np.any(pi > 1):
            raise ValueError("propensities must lie in (0, 1]")

        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "R", _frozen(R))
        object.__setattr__(self, "propensity", _frozen(pi))
        object.__setattr__(self, "K", K)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class FittedRule:
    """Decision rule ``f(x, k) = g(x) + b_k`` for levels ``k = 1..K-1``.

    The predicted treatment is ``1 + sum_k I(f(x, k) > 0)``. Because all
    levels share the shape ``g``, boundaries differ only by intercepts and
    cannot cross.

    ``kind="linear"`` stores ``g(x) = x . beta``; ``kind="kernel"`` stores
    support points and coefficients, ``g(x) = sum_j coeffs[j] k(x, support[j])``
    under ``kernel``.

    Attributes
    ----------
    kind : {"linear", "kernel"}
    K : int
        Number of treatment levels.
    lam : float
        Regularization weight the rule was fitted with.
    C : float
        Equivalent box scale ``1 / (2 lam)`` used by the dual solver.
    intercepts : (K-1,) ndarray
        Per-level intercepts ``b_k``.
    beta : (p,) ndarray, linear rules only.
    kernel : KernelSpec, kernel rules only.
    support : (m, p) ndarray, kernel rules only.
    coeffs : (m,) ndarray, kernel rules only.
    kkt_violation : float
        Dual solver's stationarity residual at termination.
    intercept_degenerate : tuple of bool
        Per-level flag: True where every duplicated row at that level had
        zero weight, so the intercept defaulted to 0.
    """

    kind: str
    K: int
    lam: float
    C: float
    intercepts: np.ndarray
    beta: np.ndarray | None = None
    kernel: KernelSpec | None = None
    support: np.ndarray | None = None
    coeffs: np.ndarray | None = None
    kkt_violation: float = 0.0
    intercept_degenerate: tuple = ()

    def __post_init__(self):
        if self.kind not in ("linear", "kernel"):
            raise ValueError(f"unknown rule kind {self.kind!r}")
        K = int(self.K)
        if K < 2:
            raise ValueError("K must be at least 2")
        b = np.asarray(self.intercepts, dtype=float)
        if b.shape != (K - 1,) or not np.all(np.isfinite(b)):
            raise ValueError("intercepts must be a finite length-(K-1) vector")
        if self.kind == "linear":
            if self.beta is None:
                raise ValueError("linear rule requires beta")
            beta = np.asarray(self.beta, dtype=float)
            if beta.ndim != 1 or not np.all(np.isfinite(beta)):
                raise ValueError("beta must be a finite vector")
            object.__setattr__(self, "beta", _frozen(beta))
        else:
            if self.kernel is None or self.support is None or self.coeffs is None:
                raise ValueError("kernel rule requires kernel, support and coeffs")
            sup = np.asarray(self.support, dtype=float)
            c = np.asarray(self.coeffs, dtype=float)
            if sup.ndim != 2 or c.shape != (sup.shape[0],):
                raise ValueError("support must be (m, p) with coeffs of length m")
            if not (np.all(np.isfinite(sup)) and np.all(np.isfinite(c))):
                raise ValueError("support and coeffs must be finite")
            object.__setattr__(self, "support", _frozen(sup))
            object.__setattr__(self, "coeffs", _frozen(c))
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "C", float(self.C))
        object.__setattr__(self, "intercepts", _frozen(b))
        object.__setattr__(self, "kkt_violation", float(self.kkt_violation))
        object.__setattr__(self, "intercept_degenerate", tuple(bool(x) for x in self.intercept_degenerate))

    @property
    def p(self) -> int:
        """Covariate dimension the rule accepts."""
        if self.kind == "linear":
            return self.beta.shape[0]
        return self.support.shape[1]
