"""Synthetic ordinal-treatment benchmarks with known optimal rules.

Every scenario draws covariates X ~ Uniform(-1, 1)^p iid, assigns the
treatment uniformly on {1..K} independently of X (propensity exactly
1/K), and sets R = Q(X, A) + N(0, 1). The scenario id fixes K, p, and
the mean function Q; the optimal rule argmax_a Q(x, a) has a closed
form in every case and is returned alongside the draws.

Scenario families:

* ``L2`` / ``N2``: two treatments, p = 4, a single linear (L) or
  quadratic (N) contrast that flips the better arm.
* ``L3`` / ``L5`` / ``L7``: a linear score binned by fixed cut points
  picks the best arm; Q decreases by 4 per level of distance from it.
* ``N3`` / ``N5`` / ``N7``: same structure with a nonlinear score
  (``N7`` drops the exp(x6^2) term of the score).
* ``NP3``: p = 2, three arms chosen by nested regions (a disc, then a
  half-plane), Q decreasing by 2 per level of distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset

__all__ = [
    "LabeledDataset",
    "SCENARIO_IDS",
    "ScenarioConfig",
    "derive_seed",
    "generate",
    "q_matrix",
    "true_optimal",
]

# id -> (K, p)
_SHAPES = {
    "L2": (2, 4),
    "L3": (3, 6),
    "L5": (5, 6),
    "L7": (7, 6),
    "N2": (2, 4),
    "N3": (3, 6),
    "N5": (5, 6),
    "N7": (7, 6),
    "NP3": (3, 2),
}
SCENARIO_IDS = tuple(sorted(_SHAPES))

# Cut points defining half-open score bins (b_{k-1}, b_k]; below the first
# cut is bin 1, above the last is bin K.
_CUTS = {
    "L3": (-0.5, 1.0),
    "L5": (-1.9, -0.5, 0.5, 1.7),
    "L7": (-2.1, -1.2, -0.4, 0.4, 1.0, 2.1),
    "N3": (0.0, 1.3),
    "N5": (-0.4, 0.3, 1.1, 2.1),
    "N7": (-0.7, -0.2, 0.4, 1.0, 1.8, 2.8),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """One reproducible draw: scenario id, sample size, seed."""

    id: str
    n: int
    seed: int

    def __post_init__(self):
        if self.id not in _SHAPES:
            raise ValueError(f"unknown scenario {self.id!r}; choose from {SCENARIO_IDS}")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def K(self) -> int:
        return _SHAPES[self.id][0]

    @property
    def p(self) -> int:
        return _SHAPES[self.id][1]


@dataclass(frozen=True)
class LabeledDataset:
    """A generated sample plus the ground truth the generator knows.

    ``truth`` is the optimal treatment per subject and ``q_values`` the
    (n, K) matrix of mean outcomes; truth is the unique argmax of each
    row (ties cannot occur for these mean functions on a continuous
    covariate draw, and this is checked).
    """

    data: Dataset
    truth: np.ndarray
    q_values: np.ndarray

    def __post_init__(self):
        truth = np.asarray(self.truth, dtype=np.int64)
        q = np.asarray(self.q_values, dtype=float)
        object.__setattr__(self, "truth", truth)
        object.__setattr__(self, "q_values", q)
        n, K = self.data.n, self.data.K
        if truth.shape != (n,) or q.shape != (n, K):
            raise ValueError("truth/q_values shapes disagree with the data")
        if np.any(truth != np.argmax(q, axis=1) + 1):
            raise ValueError("truth must be the argmax of q_values")
        top = np.max(q, axis=1)
        runners = np.partition(q, K - 2, axis=1)[:, K - 2]
        if np.any(top - runners <= 0):
            raise ValueError("optimal treatment must be unique per subject")
        truth.setflags(write=False)
        q.setflags(write=False)


def _linear_score(X: np.ndarray) -> np.ndarray:
    return -X[:, 0] + 2 * X[:, 1] + X[:, 2] + 0.6 * X[:, 3] - 1.5 * (X[:, 4] + X[:, 5])


def _nonlinear_score(X: np.ndarray, with_exp_term: bool) -> np.ndarray:
    g = (
        -3.0
        - X[:, 0] ** 2
        + 2.0 * np.exp(X[:, 1])
        + (X[:, 2] - 0.6 * X[:, 3]) ** 2
        + X[:, 4] ** 3
    )
    if with_exp_term:
        g = g + np.exp(X[:, 5] ** 2)
    return g


def _score_bins(scenario: str, X: np.ndarray) -> np.ndarray:
    """Best arm for the binned scenarios: 1 + #cuts strictly below the score
    (so each bin is the half-open interval (b_{k-1}, b_k])."""
    if scenario.startswith("L"):
        g = _linear_score(X)
    else:
        g = _nonlinear_score(X, with_exp_term=scenario != "N7")
    cuts = np.asarray(_CUTS[scenario], dtype=float)
    return np.searchsorted(cuts, g, side="left") + 1


def _np3_regions(X: np.ndarray) -> np.ndarray:
    """NP3 best arm: 1 inside the unit disc at (-1, -1), else 2 above the
    line x1 + x2 = 2/3, else 3. The disc is checked first."""
    best = np.full(X.shape[0], 3, dtype=np.int64)
    line = X[:, 0] + X[:, 1] > 2.0 / 3.0
    best[line] = 2
    disc = (X[:, 0] + 1.0) ** 2 + (X[:, 1] + 1.0) ** 2 < 1.0
    best[disc] = 1
    return best


def q_matrix(scenario: str, X: np.ndarray) -> np.ndarray:
    """Mean outcome Q(x, a) for every row of X and every arm, shape (n, K)."""
    if scenario not in _SHAPES:
        raise ValueError(f"unknown scenario {scenario!r}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    K, p = _SHAPES[scenario]
    if X.shape[1] != p:
        raise ValueError(f"scenario {scenario} expects p = {p} covariates")
    arms = np.arange(1, K + 1)
    if scenario == "L2":
        mu = 1 + X[:, 0] + X[:, 1] + 2 * X[:, 2] + 0.5 * X[:, 3]
        contrast = 1.8 * (0.3 - X[:, 0] - X[:, 1])
        return mu[:, None] + contrast[:, None] * (2 * arms - 3)[None, :]
    if scenario == "N2":
        mu = 1 + X[:, 0] ** 2 + X[:, 1] ** 2 - 2 * X[:, 2] + 0.5 * X[:, 3]
        contrast = 4.0 * (0.7 - X[:, 0] ** 2 - X[:, 1] ** 2)
        return mu[:, None] + contrast[:, None] * (2 * arms - 3)[None, :]
    if scenario == "NP3":
        # The constant centers the rewards so about 70% come out positive
        # (3 gives 0.704); at 2 only 55% are positive and the extra
        # negative-reward mass drags the fitted level separation far
        # below the width the middle (corner) arm needs, flattening its
        # region away.
        mu = 3 + X[:, 0] + 0.5 * X[:, 1]
        best = _np3_regions(X)
        return mu[:, None] - 2.0 * np.abs(arms[None, :] - best[:, None])
    mu = 2 + 2 * X[:, 0] + X[:, 1] + 0.5 * X[:, 2]
    best = _score_bins(scenario, X)
    # Treatment effects form a staircase dropping 4 per level of distance
    # from the best arm.  The peak height sets the fraction of positive
    # rewards; 3.5 keeps it near 70% for K = 3, where the two-step
    # staircase would otherwise leave every arm with a positive mean
    # reward and the sign-weighted hinge would collapse onto a constant
    # rule.
    peak = 3.5 if K == 3 else 8.0
    return mu[:, None] + peak - 4.0 * np.abs(arms[None, :] - best[:, None])


def true_optimal(config: ScenarioConfig, x: np.ndarray) -> int | np.ndarray:
    """Closed-form optimal arm for one covariate vector or a matrix of them."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != config.p:
        raise ValueError(f"scenario {config.id} expects p = {config.p} covariates")
    sc = config.id
    if sc == "L2":
        best = np.where(0.3 - X[:, 0] - X[:, 1] > 0, 2, 1).astype(np.int64)
    elif sc == "N2":
        best = np.where(0.7 - X[:, 0] ** 2 - X[:, 1] ** 2 > 0, 2, 1).astype(np.int64)
    elif sc == "NP3":
        best = _np3_regions(X)
    else:
        best = _score_bins(sc, X).astype(np.int64)
    return int(best[0]) if single else best


def generate(config: ScenarioConfig) -> LabeledDataset:
    """Draw one dataset; bit-identical for equal configs.

    Draw order is fixed (X, then A, then the outcome noise) so adding
    fields later cannot silently reshuffle existing streams.
    """
    rng = np.random.default_rng(config.seed)
    K, p = config.K, config.p
    X = rng.uniform(-1.0, 1.0, size=(config.n, p))
    A = rng.integers(1, K + 1, size=config.n)
    q = q_matrix(config.id, X)
    R = q[np.arange(config.n), A - 1] + rng.standard_normal(config.n)
    data = Dataset(X=X, A=A, R=R, propensity=np.full(config.n, 1.0 / K), K=K)
    truth = np.argmax(q, axis=1) + 1
    return LabeledDataset(data=data, truth=truth, q_values=q)


def derive_seed(master: int, *path: int) -> int:
    """Stable child seed for a labeled position in an experiment tree.

    Uses the spawn-key mechanism of :class:`numpy.random.SeedSequence`,
    so distinct paths give statistically independent streams and the
    mapping never depends on call order.
    """
    seq = np.random.SeedSequence(master, spawn_key=tuple(int(p) for p in path))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
