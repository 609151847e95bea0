"""Rule quality metrics, grid tuning, and replication drivers.

A "rule" anywhere in this module is one of: a joint fitted rule, a
baseline rule, or a plain integer array of treatment levels (one per
subject, e.g. the generator's ground truth). All three expose the same
two views: predicted levels, and the per-boundary sign matrix
sign(level - k) that the value estimator needs.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np

from . import baselines as _bl
from . import solver as _sv
from .core import Dataset, KernelSpec, sign
from .simulation import LabeledDataset, ScenarioConfig, derive_seed, generate

__all__ = [
    "CVReport",
    "EvalReport",
    "GridCell",
    "TuneResult",
    "benchmark",
    "cross_validate",
    "default_grid",
    "empirical_value",
    "level_signs",
    "misclassification",
    "predict_any",
    "tune",
    "value_mse",
]

METHODS = ("gowl", "owl", "pls_l1")

DEFAULT_LAMBDA_MULTIPLIERS = (0.1, 1.0, 10.0, 100.0, 500.0)
DEFAULT_SIGMAS = (0.1, 1.0, 10.0)


@dataclass(frozen=True)
class GridCell:
    """One tuning candidate: regularization lam, and the Gaussian kernel
    width when applicable (sigma None means the linear kernel)."""

    lam: float
    sigma: float | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be > 0")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be > 0 when given")

    @property
    def kernel(self) -> KernelSpec:
        if self.sigma is None:
            return KernelSpec(kind="linear")
        return KernelSpec(kind="gaussian", sigma=self.sigma)


def default_grid(
    kernel_kind: str,
    n: int,
    lam_multipliers=DEFAULT_LAMBDA_MULTIPLIERS,
    sigmas=DEFAULT_SIGMAS,
) -> tuple[GridCell, ...]:
    """Candidate cells with lam = i / n, i over ``lam_multipliers``.

    ``n`` should be the size of the sample the cells will be fitted on,
    so the penalty scale tracks the sample size. The Gaussian grid is the
    full lam x sigma product; the linear grid carries sigma = None.
    """
    if kernel_kind not in ("linear", "gaussian"):
        raise ValueError(f"unknown kernel kind {kernel_kind!r}")
    lams = [m / n for m in lam_multipliers]
    if kernel_kind == "linear":
        return tuple(GridCell(lam=lam) for lam in lams)
    return tuple(GridCell(lam=lam, sigma=s) for lam in lams for s in sigmas)


def _is_level_array(rule) -> bool:
    return isinstance(rule, (np.ndarray, list, tuple))


def predict_any(rule, X: np.ndarray) -> np.ndarray:
    """Predicted levels for any rule kind, shape (rows of X,)."""
    if _is_level_array(rule):
        return np.asarray(rule, dtype=np.int64)
    if isinstance(rule, _bl.BaselineRule):
        return np.atleast_1d(_bl.predict(rule, np.atleast_2d(X)))
    return np.atleast_1d(_sv.predict(rule, np.atleast_2d(X)))


def level_signs(rule, X: np.ndarray, K: int) -> np.ndarray:
    """Per-boundary signs sign_k(x) in {-1, +1}, shape (m, K-1).

    For fitted rules this is the sign of each boundary's decision value
    (0 counts as -1, matching the strict > in prediction); for a level
    array d it is sign(d - k), so summing the +1 entries recovers d - 1.
    """
    ks = np.arange(1, K)
    if _is_level_array(rule):
        levels = np.asarray(rule, dtype=np.int64)
        if np.any(levels < 1) or np.any(levels > K):
            raise ValueError("levels must lie in 1..K")
        return sign(levels[:, None] - ks[None, :])
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(rule, _bl.BaselineRule):
        vals = _bl.sub_decision_values(rule, X)
    else:
        vals = _sv.decision_values(rule, X)[:, None] + rule.intercepts[None, :]
    if vals.shape[1] != K - 1:
        raise ValueError("rule and K disagree on the number of boundaries")
    return np.where(vals > 0, 1, -1).astype(np.int64)


def misclassification(rule, labeled: LabeledDataset) -> float:
    """Fraction of subjects whose predicted level differs from the truth."""
    pred = predict_any(rule, labeled.data.X)
    return float(np.mean(pred != labeled.truth))


def empirical_value(rule, data: Dataset) -> float:
    """Inverse-propensity estimate of the mean outcome under the rule.

    Each subject contributes once per boundary on which the rule agrees
    with the side the observed treatment fell on; with m_i such
    agreements out of K-1,

        value = sum_i m_i R_i / pi_i  /  sum_i m_i / pi_i.

    Raises ValueError when no boundary of any subject agrees (the
    estimate is undefined). With uniform propensities, a rule matching
    every observed treatment returns exactly mean(R).
    """
    K = data.K
    rule_signs = level_signs(rule, data.X, K)
    obs_signs = sign(data.A[:, None] - np.arange(1, K)[None, :])
    m = np.sum(rule_signs == obs_signs, axis=1).astype(float)
    den = float(np.sum(m / data.propensity))
    if den == 0.0:
        raise ValueError("value estimate undefined: rule agrees with no observed boundary")
    num = float(np.sum(m * data.R / data.propensity))
    return num / den


def value_mse(pairs) -> float:
    """Mean squared gap between fitted-rule and optimal-rule value estimates.

    ``pairs`` is an iterable of (value_fitted, value_optimal) tuples, one
    per replication, both estimated on the same test draw.
    """
    arr = np.asarray(list(pairs), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
        raise ValueError("pairs must be a non-empty sequence of (fitted, optimal) values")
    return float(np.mean((arr[:, 0] - arr[:, 1]) ** 2))


def _fit_cell(
    train: Dataset,
    cell: GridCell,
    method: str,
    strategy: str,
    shift_margin: float,
    kkt_tol: float,
):
    if method == "gowl":
        return _sv.fit(train, cell.lam, cell.kernel, strategy=strategy, kkt_tol=kkt_tol)
    if method == "owl":
        return _bl.fit_owl(train, cell.lam, cell.kernel, shift_margin=shift_margin)
    if method == "pls_l1":
        if cell.sigma is not None:
            raise ValueError("pls_l1 takes a linear grid (sigma must be None)")
        return _bl.fit_pls_l1(train, cell.lam)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


@dataclass(frozen=True)
class TuneResult:
    """Grid search outcome: the winning cell and refusal-free diagnostics.

    ``scores[i]`` is the tuning score of ``cells[i]`` (NaN when that fit
    or scoring failed; the message is in ``errors[i]``).
    """

    cell: GridCell
    rule: object
    cells: tuple
    scores: tuple
    errors: tuple

    @property
    def best_index(self) -> int:
        return self.cells.index(self.cell)


def _prefer(cand_score, cand_cell, best_score, best_cell) -> bool:
    """True when the candidate should replace the incumbent: higher score,
    ties broken toward heavier regularization, then wider kernels."""
    if cand_score != best_score:
        return cand_score > best_score
    if cand_cell.lam != best_cell.lam:
        return cand_cell.lam > best_cell.lam
    return (cand_cell.sigma or 0.0) > (best_cell.sigma or 0.0)


def tune(
    train: Dataset,
    tune_set,
    method: str = "gowl",
    grid: tuple = (),
    *,
    criterion: str = "value",
    strategy: str = "full",
    shift_margin: float = 0.1,
    kkt_tol: float = 1e-5,
) -> TuneResult:
    """Fit every grid cell on ``train`` and keep the best scorer on ``tune_set``.

    ``criterion`` "value" maximizes the empirical value (tune_set may be a
    plain Dataset or a labeled one); "misc" minimizes misclassification
    and needs a labeled tune_set. Cells that raise are skipped and
    reported; if every cell fails the search itself raises.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if criterion not in ("value", "misc"):
        raise ValueError("criterion must be 'value' or 'misc'")
    if not grid:
        raise ValueError("grid must contain at least one cell")
    labeled = hasattr(tune_set, "truth") and hasattr(tune_set, "data")
    if criterion == "misc" and not labeled:
        raise ValueError("criterion 'misc' needs a labeled tuning set")
    tune_data = tune_set.data if labeled else tune_set

    best = None
    scores, errors, rules = [], [], []
    for cell in grid:
        try:
            rule = _fit_cell(train, cell, method, strategy, shift_margin, kkt_tol)
            if criterion == "value":
                score = empirical_value(rule, tune_data)
            else:
                score = -misclassification(rule, tune_set)
            scores.append(score)
            errors.append(None)
            rules.append(rule)
        except (ValueError, RuntimeError, FloatingPointError) as exc:
            scores.append(float("nan"))
            errors.append(f"{type(exc).__name__}: {exc}")
            rules.append(None)
            continue
        if best is None or _prefer(score, cell, scores[best], grid[best]):
            best = len(scores) - 1
    if best is None:
        raise RuntimeError(
            "every grid cell failed; first error: "
            + next(e for e in errors if e is not None)
        )
    return TuneResult(
        cell=grid[best],
        rule=rules[best],
        cells=tuple(grid),
        scores=tuple(scores),
        errors=tuple(errors),
    )


@dataclass(frozen=True)
class EvalReport:
    """Replication summary for one scenario / method / kernel setting."""

    scenario: str
    method: str
    kernel_kind: str
    n_train: int
    reps: int
    misc: np.ndarray
    value_fitted: np.ndarray
    value_optimal: np.ndarray
    chosen: tuple

    @property
    def misc_mean(self) -> float:
        return float(np.mean(self.misc))

    @property
    def misc_sd(self) -> float:
        return float(np.std(self.misc, ddof=1)) if self.reps > 1 else 0.0

    @property
    def value_fitted_mean(self) -> float:
        return float(np.mean(self.value_fitted))

    @property
    def value_mse(self) -> float:
        return value_mse(zip(self.value_fitted, self.value_optimal))


def benchmark(
    scenario: str,
    n_train: int,
    method: str = "gowl",
    kernel_kind: str = "linear",
    reps: int = 20,
    master_seed: int = 0,
    *,
    lam_multipliers=DEFAULT_LAMBDA_MULTIPLIERS,
    sigmas=DEFAULT_SIGMAS,
    strategy: str = "full",
    shift_margin: float = 0.1,
    n_test_factor: int = 10,
    kkt_tol: float = 1e-5,
    threads: int = 1,
) -> EvalReport:
    """Repeat draw -> tune -> evaluate ``reps`` times and collect metrics.

    Each replication r draws independent train / tune / test sets (test
    is ``n_test_factor`` times larger) from child seeds (r, 0), (r, 1),
    (r, 2) of ``master_seed``, tunes on the value criterion over the
    default grid built for ``n_train``, then records test
    misclassification and the test-set value estimates of the selected
    rule and of the true optimal rule. ``threads`` > 1 runs replications
    concurrently (the solver core releases the GIL).
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    grid_kind = "linear" if method == "pls_l1" else kernel_kind
    grid = default_grid(grid_kind, n_train, lam_multipliers, sigmas)
    misc = np.empty(reps)
    v_fit = np.empty(reps)
    v_opt = np.empty(reps)
    chosen: list = [None] * reps

    def one_rep(r: int) -> None:
        tr = generate(ScenarioConfig(scenario, n_train, derive_seed(master_seed, r, 0)))
        tu = generate(ScenarioConfig(scenario, n_train, derive_seed(master_seed, r, 1)))
        te = generate(
            ScenarioConfig(scenario, n_train * n_test_factor, derive_seed(master_seed, r, 2))
        )
        res = tune(
            tr.data,
            tu,
            method=method,
            grid=grid,
            strategy=strategy,
            shift_margin=shift_margin,
            kkt_tol=kkt_tol,
        )
        misc[r] = misclassification(res.rule, te)
        v_fit[r] = empirical_value(res.rule, te.data)
        v_opt[r] = empirical_value(te.truth, te.data)
        chosen[r] = res.cell

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one_rep, range(reps)))
    else:
        for r in range(reps):
            one_rep(r)
    return EvalReport(
        scenario=scenario,
        method=method,
        kernel_kind=kernel_kind,
        n_train=n_train,
        reps=reps,
        misc=misc,
        value_fitted=v_fit,
        value_optimal=v_opt,
        chosen=tuple(chosen),
    )


def _subset(data: Dataset, idx: np.ndarray) -> Dataset:
    return Dataset(
        X=data.X[idx],
        A=data.A[idx],
        R=data.R[idx],
        propensity=data.propensity[idx],
        K=data.K,
    )


@dataclass(frozen=True)
class CVReport:
    """Cross-validated value estimates: one entry per (rep, fold).

    NaN marks folds where the value estimate was undefined; these are
    excluded from the summaries and counted in ``n_missing``.
    """

    values: np.ndarray
    chosen: tuple
    folds: int
    reps: int

    @property
    def value_mean(self) -> float:
        return float(np.nanmean(self.values))

    @property
    def value_sd(self) -> float:
        vals = self.values[np.isfinite(self.values)]
        return float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0

    @property
    def n_missing(self) -> int:
        return int(np.sum(~np.isfinite(self.values)))


def cross_validate(
    data: Dataset,
    folds: int = 5,
    reps: int = 50,
    method: str = "gowl",
    grid: tuple = (),
    master_seed: int = 0,
    *,
    kernel_kind: str = "linear",
    strategy: str = "full",
    shift_margin: float = 0.1,
    kkt_tol: float = 1e-5,
    threads: int = 1,
) -> CVReport:
    """Repeated k-fold estimate of the value a method attains on ``data``.

    Each rep shuffles the subjects (child seed = rep index) and splits
    them into ``folds`` parts. For each held-out part, the remaining
    subjects are split 80/20 into fit and tuning sets to pick a grid
    cell, the winner is refitted on all remaining subjects, and its
    empirical value on the held-out part is recorded. When no ``grid`` is
    given a default one is built for ``kernel_kind`` at the fit size.
    """
    if folds < 2 or folds > data.n:
        raise ValueError("folds must lie in 2..n")
    if not grid:
        pool_n = data.n - data.n // folds
        grid_kind = "linear" if method == "pls_l1" else kernel_kind
        grid = default_grid(grid_kind, pool_n)
    values = np.full((reps, folds), np.nan)
    chosen: list = [None] * (reps * folds)

    def one_rep(rep: int) -> None:
        rng = np.random.default_rng(derive_seed(master_seed, rep))
        perm = rng.permutation(data.n)
        parts = np.array_split(perm, folds)
        for f in range(folds):
            held = parts[f]
            pool = np.concatenate([parts[g] for g in range(folds) if g != f])
            cut = int(round(0.8 * len(pool)))
            cut = min(max(cut, 1), len(pool) - 1)
            try:
                res = tune(
                    _subset(data, pool[:cut]),
                    _subset(data, pool[cut:]),
                    method=method,
                    grid=grid,
                    strategy=strategy,
                    shift_margin=shift_margin,
                    kkt_tol=kkt_tol,
                )
                rule = _fit_cell(
                    _subset(data, pool), res.cell, method, strategy, shift_margin, kkt_tol
                )
                values[rep, f] = empirical_value(rule, _subset(data, held))
                chosen[rep * folds + f] = res.cell
            except (ValueError, RuntimeError):
                values[rep, f] = np.nan

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool_ex:
            list(pool_ex.map(one_rep, range(reps)))
    else:
        for rep in range(reps):
            one_rep(rep)
    return CVReport(values=values, chosen=tuple(chosen), folds=folds, reps=reps)
