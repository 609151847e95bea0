"""Reduction of an ordinal-treatment dataset to duplicated binary rows.

Each subject ``i`` is replicated once per boundary ``k = 1..K-1`` with the
binary label ``sign(a_i - k)`` ("is the observed level above k?"). The
duplicated covariate is conceptually ``(x_i, e_k)``, but the ``e_k`` block
is never materialized: its only effect is the ``[k = h]`` term of the
extended kernel and the per-level intercepts, both handled explicitly.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .core import Dataset, KernelSpec, sign

__all__ = [
    "DuplicatedData",
    "DuplicatedSample",
    "base_kernel",
    "duplicate",
    "duplicate_partial",
    "extended_gram",
    "extended_kernel",
]


@dataclass(frozen=True)
class DuplicatedSample:
    """One duplicated row ``(i, k)``.

    Attributes
    ----------
    base_index : int
        Subject index ``i`` in ``{1..n}`` (1-based, matching treatment
        levels' 1-based convention).
    dup_index : int
        Boundary index ``k`` in ``{1..K-1}``.
    label : int
        Binary label ``sign(a_i - k)`` in ``{-1, +1}``.
    reward : float
        Row reward: the subject's reward under the full strategy, or
        ``r_i * I(a_i in {k, k+1})`` under the partial strategy.
    weight : float
        ``|reward| / propensity_i``, >= 0.
    reward_nonneg : bool
        ``reward >= 0``; decides which hinge branch the row pays.
    """

    base_index: int
    dup_index: int
    label: int
    reward: float
    weight: float
    reward_nonneg: bool


@dataclass(frozen=True)
class DuplicatedData(Sequence):
    """Column-oriented sequence of :class:`DuplicatedSample` rows.

    Stores the duplicated set as parallel arrays (the solver consumes the
    arrays directly) while indexing and iteration yield per-row
    :class:`DuplicatedSample` views.
    """

    base_index: np.ndarray
    dup_index: np.ndarray
    label: np.ndarray
    reward: np.ndarray
    weight: np.ndarray
    reward_nonneg: np.ndarray
    n_subjects: int
    K: int

    def __len__(self) -> int:
        return self.base_index.shape[0]

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return [self[i] for i in range(*idx.indices(len(self)))]
        i = int(idx)
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(idx)
        return DuplicatedSample(
            base_index=int(self.base_index[i]),
            dup_index=int(self.dup_index[i]),
            label=int(self.label[i]),
            reward=float(self.reward[i]),
            weight=float(self.weight[i]),
            reward_nonneg=bool(self.reward_nonneg[i]),
        )


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a)
    out.flags.writeable = False
    return out


def _build(data: Dataset, base0: np.ndarray, dup: np.ndarray, reward: np.ndarray) -> DuplicatedData:
    weight = np.abs(reward) / data.propensity[base0]
    return DuplicatedData(
        base_index=_readonly(base0 + 1),
        dup_index=_readonly(dup),
        label=_readonly(sign(data.A[base0] - dup)),
        reward=_readonly(reward),
        weight=_readonly(weight),
        reward_nonneg=_readonly(reward >= 0),
        n_subjects=data.n,
        K=data.K,
    )


def duplicate(data: Dataset) -> DuplicatedData:
    """Full-strategy duplication: every subject appears at every boundary.

    Produces exactly ``n (K-1)`` rows in subject-major, boundary-minor
    order; row ``(i, k)`` carries label ``sign(a_i - k)``, reward ``r_i``,
    and weight ``|r_i| / propensity_i``.
    """
    n, K = data.n, data.K
    base0 = np.repeat(np.arange(n), K - 1)
    dup = np.tile(np.arange(1, K), n)
    return _build(data, base0, dup, data.R[base0].copy())


def duplicate_partial(data: Dataset) -> DuplicatedData:
    """Partial-strategy duplication: ``reward = r_i * I(a_i in {k, k+1})``.

    Rows whose reward is exactly 0 (either because the subject's level is
    not adjacent to boundary ``k`` or because ``r_i = 0``) carry zero
    weight and cannot move the objective, so they are dropped here rather
    than inflating the dual problem.
    """
    n, K = data.n, data.K
    base0 = np.repeat(np.arange(n), K - 1)
    dup = np.tile(np.arange(1, K), n)
    a = data.A[base0]
    reward = data.R[base0] * ((a == dup) | (a == dup + 1))
    keep = reward != 0
    return _build(data, base0[keep], dup[keep], reward[keep])


def base_kernel(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Base kernel matrix ``k(x_i, y_j)`` between the rows of X and Y.

    Linear: ``x . y``. Gaussian: ``exp(-||x - y||^2 / (2 sigma^2))``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ValueError("kernel arguments must share the covariate dimension")
    if spec.kind == "linear":
        return X @ Y.T
    sq = (
        np.sum(X * X, axis=1)[:, None]
        + np.sum(Y * Y, axis=1)[None, :]
        - 2.0 * (X @ Y.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * spec.sigma**2))


def extended_kernel(spec: KernelSpec, x_i, k: int, x_j, h: int) -> float:
    """Kernel between duplicated points: ``k(x_i, x_j) + [k = h]``.

    The indicator term is the inner product of the implicit ``e_k`` blocks
    and is what lets one shared ``g`` carry per-level intercepts.
    """
    x_i = np.asarray(x_i, dtype=float).reshape(1, -1)
    x_j = np.asarray(x_j, dtype=float).reshape(1, -1)
    if k < 1 or h < 1:
        raise ValueError("duplicate indices are 1-based and must be >= 1")
    return float(base_kernel(spec, x_i, x_j)[0, 0]) + (1.0 if k == h else 0.0)


def extended_gram(spec: KernelSpec, X: np.ndarray, rows: DuplicatedData) -> np.ndarray:
    """Extended-kernel Gram matrix over all duplicated rows.

    Entry ``(m, m')`` is ``k(x_{i_m}, x_{i_m'}) + [k_m = k_m']``. Built by
    indexing the n-by-n base Gram, so cost stays O(n^2 p + M^2) instead of
    materializing duplicated covariates.
    """
    base = base_kernel(spec, X, X)
    idx = rows.base_index - 1
    gram = base[np.ix_(idx, idx)]
    gram += rows.dup_index[:, None] == rows.dup_index[None, :]
    return gram
