"""Command-line interface: simulate, fit, predict, evaluate, tune, bench.

CSV schema (header required): columns ``x1..xp`` (floats), ``treatment``
(integers 1..K), ``reward`` (float), then optionally ``propensity`` and
``truth``. Model files are versioned plain text (``format_version=1``
first, then key=value lines); floats are written with 17 significant
digits so a save/load round trip is bit exact.

Exit codes: 0 success, 2 usage or validation error, 3 numerical failure
(a fit stopped beyond its tolerance), 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import BaselineRule, PlsSubRule, fit_owl, fit_pls_l1
from .core import Dataset, FittedRule, KernelSpec
from .evaluation import (
    GridCell,
    benchmark,
    default_grid,
    empirical_value,
    misclassification,
    predict_any,
    tune,
)
from .propensity import DEFAULT_FLOOR, PropensityModel, fit_proportional_odds
from .simulation import (
    SCENARIO_IDS,
    LabeledDataset,
    ScenarioConfig,
    derive_seed,
    generate,
)
from .solver import fit as gowl_fit

__all__ = ["main", "load_model", "save_model"]

FORMAT_VERSION = 1
_FLOAT_FMT = "%.17g"


class UsageError(ValueError):
    """Bad flags, bad config, or malformed input data (exit 2)."""


class NumericalError(RuntimeError):
    """A fit terminated beyond its tolerance (exit 3)."""


def _fmt(v: float) -> str:
    return _FLOAT_FMT % float(v)


def _fmt_vec(v) -> str:
    return ",".join(_fmt(x) for x in np.asarray(v, dtype=float).ravel())


def _parse_vec(s: str) -> np.ndarray:
    if s == "":
        return np.zeros(0)
    return np.array([float(x) for x in s.split(",")])


# ---------------------------------------------------------------- CSV I/O


class Table:
    """Parsed CSV contents; optional columns are None when absent."""

    def __init__(self, X, A, R, propensity=None, truth=None):
        self.X = X
        self.A = A
        self.R = R
        self.propensity = propensity
        self.truth = truth


def _read_rows(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise UsageError(f"{path}: empty file, expected a CSV header")
        return [h.strip() for h in header], [row for row in reader if row]


def read_table(path: str) -> Table:
    """Read the full dataset schema, validating the header column by column."""
    header, rows = _read_rows(path)
    p = 0
    while p < len(header) and header[p] == f"x{p + 1}":
        p += 1
    if p == 0:
        raise UsageError(f"{path}: first column must be 'x1', found {header[0]!r}")
    rest = header[p:]
    expected = ["treatment", "reward"]
    for got, want in zip(rest, expected):
        if got != want:
            raise UsageError(f"{path}: expected column {want!r}, found {got!r}")
    if len(rest) < 2:
        raise UsageError(f"{path}: missing required column(s) {expected[len(rest):]}")
    extras = rest[2:]
    allowed = ["propensity", "truth"]
    for col in extras:
        if col not in allowed:
            raise UsageError(f"{path}: unexpected column {col!r}")
    if extras != [c for c in allowed if c in extras]:
        raise UsageError(f"{path}: optional columns must appear in order {allowed}")
    ncol = len(header)
    data = np.empty((len(rows), ncol))
    for i, row in enumerate(rows):
        if len(row) != ncol:
            raise UsageError(f"{path}: row {i + 2} has {len(row)} fields, expected {ncol}")
        for j, cell in enumerate(row):
            try:
                data[i, j] = float(cell)
            except ValueError:
                raise UsageError(
                    f"{path}: row {i + 2}, column {header[j]!r}: not a number: {cell!r}"
                ) from None
    X = data[:, :p]
    A = data[:, p]
    if np.any(A != np.round(A)):
        raise UsageError(f"{path}: column 'treatment' must contain integers")
    out = Table(X=X, A=A.astype(np.int64), R=data[:, p + 1])
    col = p + 2
    if "propensity" in extras:
        out.propensity = data[:, col]
        col += 1
    if "truth" in extras:
        truth = data[:, col]
        if np.any(truth != np.round(truth)):
            raise UsageError(f"{path}: column 'truth' must contain integers")
        out.truth = truth.astype(np.int64)
    return out


def write_table(path, X, A, R, propensity=None, truth=None) -> None:
    X = np.asarray(X, dtype=float)
    header = [f"x{j + 1}" for j in range(X.shape[1])] + ["treatment", "reward"]
    if propensity is not None:
        header.append("propensity")
    if truth is not None:
        header.append("truth")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(X.shape[0]):
            row = [_fmt(v) for v in X[i]] + [str(int(A[i])), _fmt(R[i])]
            if propensity is not None:
                row.append(_fmt(propensity[i]))
            if truth is not None:
                row.append(str(int(truth[i])))
            writer.writerow(row)


def _build_dataset(table: Table, K: int | None, source: str, floor: float) -> Dataset:
    """Assemble a Dataset from parsed CSV plus a propensity source."""
    A = table.A
    if A.size == 0:
        raise UsageError("dataset is empty")
    k = int(K) if K else int(A.max())
    k = max(k, 2)
    if source == "auto":
        source = "column" if table.propensity is not None else "empirical"
    if source == "column":
        if table.propensity is None:
            raise UsageError("propensity source 'column' needs a propensity column")
        pi = table.propensity
    elif source == "uniform":
        pi = np.full(A.shape, 1.0 / k)
    elif source == "empirical":
        counts = np.bincount(A, minlength=k + 1)[1:]
        missing = np.flatnonzero(counts == 0) + 1
        if missing.size:
            raise UsageError(
                f"empirical propensity needs every level observed; missing {missing.tolist()}"
            )
        model = PropensityModel(kind="empirical", K=k, probs=counts / A.size)
        pi = model.propensity(table.X, A, floor)
    elif source == "proportional_odds":
        model = fit_proportional_odds(table.X, A, k)
        pi = model.propensity(table.X, A, floor)
    else:
        raise UsageError(f"unknown propensity source {source!r}")
    return Dataset(X=table.X, A=A, R=table.R, propensity=pi, K=k)


# ----------------------------------------------------------- model files


def _kernel_lines(prefix: str, spec: KernelSpec | None) -> list[str]:
    if spec is None:
        return []
    lines = [f"{prefix}kernel_kind={spec.kind}"]
    if spec.sigma is not None:
        lines.append(f"{prefix}sigma={_fmt(spec.sigma)}")
    return lines


def _rule_lines(prefix: str, rule: FittedRule) -> list[str]:
    lines = [
        f"{prefix}rule_kind={rule.kind}",
        f"{prefix}C={_fmt(rule.C)}",
        f"{prefix}kkt_violation={_fmt(rule.kkt_violation)}",
        f"{prefix}intercepts={_fmt_vec(rule.intercepts)}",
        f"{prefix}intercept_degenerate="
        + ",".join("1" if d else "0" for d in rule.intercept_degenerate),
    ]
    lines.extend(_kernel_lines(prefix, rule.kernel))
    if rule.kind == "linear":
        lines.append(f"{prefix}beta={_fmt_vec(rule.beta)}")
    else:
        for j in range(rule.support.shape[0]):
            lines.append(
                f"{prefix}support_row={_fmt(rule.coeffs[j])},{_fmt_vec(rule.support[j])}"
            )
    return lines


def save_model(path: str, rule, *, method: str, strategy: str | None = None) -> None:
    """Write a fitted rule as versioned key=value text (17-digit floats)."""
    lines = [f"format_version={FORMAT_VERSION}", f"method={method}"]
    if isinstance(rule, FittedRule):
        p = rule.p
        lines += [f"K={rule.K}", f"p={p}", f"lam={_fmt(rule.lam)}"]
        if strategy:
            lines.append(f"strategy={strategy}")
        lines += _rule_lines("", rule)
    elif isinstance(rule, BaselineRule) and rule.method == "owl":
        sub0 = rule.sub_rules[0]
        lines += [
            f"K={rule.K}",
            f"p={sub0.p}",
            f"lam={_fmt(rule.lam)}",
            f"shift={_fmt(rule.shift)}",
        ]
        for k, sub in enumerate(rule.sub_rules, start=1):
            lines += _rule_lines(f"sub{k}_", sub)
    elif isinstance(rule, BaselineRule) and rule.method == "pls_l1":
        p = len(rule.sub_rules[0].delta)
        lines += [f"K={rule.K}", f"p={p}", f"lam={_fmt(rule.lam)}"]
        for k, sub in enumerate(rule.sub_rules, start=1):
            lines.append(f"sub{k}_gamma={_fmt(sub.gamma)}")
            lines.append(f"sub{k}_delta={_fmt_vec(sub.delta)}")
    else:
        raise UsageError(f"cannot serialize rule of type {type(rule).__name__}")
    Path(path).write_text("\n".join(lines) + "\n")


def _collect(pairs: list[tuple[str, str]], prefix: str) -> dict:
    """Group key=value pairs by prefix; repeated keys accumulate in lists."""
    out: dict = {}
    for key, value in pairs:
        if not key.startswith(prefix):
            continue
        name = key[len(prefix):]
        if name == "support_row":
            out.setdefault(name, []).append(value)
        else:
            out[name] = value
    return out


def _rule_from_fields(fields: dict, K: int, lam: float) -> FittedRule:
    kind = fields["rule_kind"]
    sigma = float(fields["sigma"]) if "sigma" in fields else None
    spec = None
    if "kernel_kind" in fields:
        spec = KernelSpec(kind=fields["kernel_kind"], sigma=sigma)
    degenerate = tuple(f == "1" for f in fields["intercept_degenerate"].split(","))
    common = dict(
        K=K,
        lam=lam,
        C=float(fields["C"]),
        intercepts=_parse_vec(fields["intercepts"]),
        kkt_violation=float(fields["kkt_violation"]),
        intercept_degenerate=degenerate,
    )
    if kind == "linear":
        return FittedRule(kind="linear", beta=_parse_vec(fields["beta"]), **common)
    rows = [_parse_vec(r) for r in fields.get("support_row", [])]
    if rows:
        support = np.vstack([r[1:] for r in rows])
        coeffs = np.array([r[0] for r in rows])
    else:
        support = np.zeros((0, int(fields["p"])))
        coeffs = np.zeros(0)
    return FittedRule(kind="kernel", kernel=spec, support=support, coeffs=coeffs, **common)


def load_model(path: str):
    """Load a model file written by :func:`save_model`.

    Returns (rule, meta) where meta holds method/K/p/lam and any strategy.
    """
    text = Path(path).read_text()
    pairs: list[tuple[str, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}: line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    top = dict(pairs)
    if top.get("format_version") != str(FORMAT_VERSION):
        raise UsageError(
            f"{path}: unsupported model format version "
            f"{top.get('format_version')!r} (this build reads {FORMAT_VERSION})"
        )
    method = top.get("method")
    try:
        K = int(top["K"])
        p = int(top["p"])
        lam = float(top["lam"])
    except KeyError as exc:
        raise UsageError(f"{path}: missing required field {exc}") from None
    meta = {"method": method, "K": K, "p": p, "lam": lam, "strategy": top.get("strategy")}
    if method == "gowl":
        fields = _collect(pairs, "")
        fields.setdefault("p", str(p))
        return _rule_from_fields(fields, K, lam), meta
    if method == "owl":
        subs = []
        for k in range(1, K):
            fields = _collect(pairs, f"sub{k}_")
            if not fields:
                raise UsageError(f"{path}: missing block for sub-rule {k}")
            fields.setdefault("p", str(p))
            subs.append(_rule_from_fields(fields, 2, lam))
        rule = BaselineRule(
            method="owl", K=K, sub_rules=tuple(subs), shift=float(top["shift"]), lam=lam
        )
        return rule, meta
    if method == "pls_l1":
        subs = []
        for k in range(1, K):
            try:
                gamma = float(top[f"sub{k}_gamma"])
                delta = _parse_vec(top[f"sub{k}_delta"])
            except KeyError as exc:
                raise UsageError(f"{path}: missing field {exc}") from None
            subs.append(PlsSubRule(gamma=gamma, delta=delta))
        rule = BaselineRule(method="pls_l1", K=K, sub_rules=tuple(subs), shift=0.0, lam=lam)
        return rule, meta
    raise UsageError(f"{path}: unknown method {method!r}")


def _check_converged(rule, tol: float) -> None:
    subs = rule.sub_rules if isinstance(rule, BaselineRule) else (rule,)
    for sub in subs:
        kkt = getattr(sub, "kkt_violation", 0.0)
        if kkt > tol:
            raise NumericalError(
                f"solver stopped with stationarity residual {kkt:.3g} > tolerance {tol:.3g}"
            )


# ----------------------------------------------------------- subcommands


def _env_threads() -> int:
    raw = os.environ.get("ORDINAL_ITR_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """Resolve option values: flags beat the JSON config, which beats defaults."""
    merged = dict(defaults)
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        try:
            with open(cfg_path) as fh:
                cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{cfg_path}: invalid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError(f"{cfg_path}: config must be a JSON object")
        for key, value in cfg.items():
            key = key.replace("-", "_")
            if key not in defaults:
                raise UsageError(f"{cfg_path}: unknown option {key!r}")
            merged[key] = value
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _as_floats(value, flag: str) -> tuple[float, ...]:
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        items = value
    else:
        items = str(value).split(",")
    try:
        return tuple(float(v) for v in items)
    except ValueError:
        raise UsageError(f"--{flag}: expected comma-separated numbers, got {value!r}") from None


def _as_strings(value) -> tuple[str, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(str(v) for v in value)
    return tuple(s for s in str(value).split(",") if s)


def _kernel_spec(kernel: str, sigma) -> KernelSpec:
    if kernel == "gaussian":
        if sigma is None:
            raise UsageError("--kernel gaussian requires --sigma")
        return KernelSpec(kind="gaussian", sigma=float(sigma))
    if kernel == "linear":
        if sigma is not None:
            raise UsageError("--sigma only applies to --kernel gaussian")
        return KernelSpec(kind="linear")
    raise UsageError(f"unknown kernel {kernel!r}")


def cmd_simulate(args) -> int:
    opt = _merge_config(
        args,
        {
            "scenario": None,
            "n": None,
            "seed": 0,
            "out": ".",
            "test_factor": 10,
            "config": None,
        },
    )
    scenario, n = opt["scenario"], opt["n"]
    if scenario is None or n is None:
        raise UsageError("simulate requires --scenario and --n")
    if scenario not in SCENARIO_IDS:
        raise UsageError(f"unknown scenario {scenario!r}; valid ids: {', '.join(SCENARIO_IDS)}")
    n = int(n)
    seed = int(opt["seed"])
    factor = int(opt["test_factor"])
    outdir = Path(opt["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    files = {}
    for split, size, child in (
        ("train", n, 0),
        ("tune", n, 1),
        ("test", n * factor, 2),
    ):
        labeled = generate(ScenarioConfig(scenario, size, derive_seed(seed, child)))
        path = outdir / f"{scenario}_{split}.csv"
        write_table(path, labeled.data.X, labeled.data.A, labeled.data.R, truth=labeled.truth)
        files[split] = path.name
    manifest = {
        "scenario": scenario,
        "n": n,
        "seed": seed,
        "test_factor": factor,
        "K": ScenarioConfig(scenario, n, seed).K,
        "p": ScenarioConfig(scenario, n, seed).p,
        "files": files,
    }
    (outdir / f"{scenario}_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    print(f"wrote {', '.join(files.values())} and {scenario}_manifest.json to {outdir}")
    return 0


_FIT_DEFAULTS = {
    "data": None,
    "model": None,
    "method": "gowl",
    "kernel": "linear",
    "sigma": None,
    "lam": None,
    "strategy": "full",
    "k": None,
    "propensity": "auto",
    "propensity_floor": DEFAULT_FLOOR,
    "shift_margin": 0.1,
    "kkt_tol": 1e-5,
    "config": None,
}


def _fit_rule(opt: dict, data: Dataset):
    method = opt["method"]
    lam = float(opt["lam"])
    if method == "gowl":
        spec = _kernel_spec(opt["kernel"], opt["sigma"])
        rule = gowl_fit(
            data, lam, spec, strategy=opt["strategy"], kkt_tol=float(opt["kkt_tol"])
        )
    elif method == "owl":
        spec = _kernel_spec(opt["kernel"], opt["sigma"])
        rule = fit_owl(data, lam, spec, shift_margin=float(opt["shift_margin"]))
    elif method == "pls_l1":
        rule = fit_pls_l1(data, lam)
    else:
        raise UsageError(f"unknown method {opt['method']!r}")
    _check_converged(rule, float(opt["kkt_tol"]))
    return rule


def cmd_fit(args) -> int:
    opt = _merge_config(args, _FIT_DEFAULTS)
    if not opt["data"] or not opt["model"] or opt["lam"] is None:
        raise UsageError("fit requires --data, --model, and --lam")
    if opt["data"] == opt["model"]:
        raise UsageError("--data and --model must be distinct paths")
    table = read_table(opt["data"])
    data = _build_dataset(
        table, opt["k"], opt["propensity"].replace("-", "_"), float(opt["propensity_floor"])
    )
    rule = _fit_rule(opt, data)
    save_model(
        opt["model"],
        rule,
        method=opt["method"],
        strategy=opt["strategy"] if opt["method"] == "gowl" else None,
    )
    kkt = getattr(rule, "kkt_violation", None)
    extra = f" kkt={kkt:.2e}" if kkt is not None else ""
    print(f"fitted {opt['method']} (K={data.K}, n={data.n}, lam={opt['lam']}) -> {opt['model']}{extra}")
    return 0


def cmd_predict(args) -> int:
    opt = _merge_config(args, {"model": None, "data": None, "out": None, "config": None})
    if not opt["model"] or not opt["data"] or not opt["out"]:
        raise UsageError("predict requires --model, --data, and --out")
    rule, meta = load_model(opt["model"])
    header, rows = _read_rows(opt["data"])
    p = meta["p"]
    want = [f"x{j + 1}" for j in range(p)]
    if header[: len(want)] != want:
        raise UsageError(
            f"{opt['data']}: model expects covariates {', '.join(want)}; header starts "
            f"with {header[: len(want)]}"
        )
    X = np.empty((len(rows), p))
    for i, row in enumerate(rows):
        if len(row) < p:
            raise UsageError(f"{opt['data']}: row {i + 2} has fewer than {p} fields")
        try:
            X[i] = [float(c) for c in row[:p]]
        except ValueError as exc:
            raise UsageError(f"{opt['data']}: row {i + 2}: {exc}") from None
    pred = predict_any(rule, X)
    with open(opt["out"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header + ["predicted_treatment"])
        for row, yhat in zip(rows, pred):
            writer.writerow(row + [str(int(yhat))])
    print(f"wrote {len(rows)} predictions to {opt['out']}")
    return 0


def cmd_evaluate(args) -> int:
    opt = _merge_config(
        args,
        {
            "model": None,
            "data": None,
            "metrics": "auto",
            "propensity": "auto",
            "propensity_floor": DEFAULT_FLOOR,
            "config": None,
        },
    )
    if not opt["model"] or not opt["data"]:
        raise UsageError("evaluate requires --model and --data")
    rule, meta = load_model(opt["model"])
    table = read_table(opt["data"])
    data = _build_dataset(
        table, meta["K"], opt["propensity"].replace("-", "_"), float(opt["propensity_floor"])
    )
    wanted = _as_strings(opt["metrics"])
    if wanted == ("auto",):
        wanted = ("value", "misc") if table.truth is not None else ("value",)
    for metric in wanted:
        if metric == "value":
            print(f"value={empirical_value(rule, data):.6f}")
        elif metric == "misc":
            if table.truth is None:
                raise UsageError(
                    "misc requested but the data has no truth column; "
                    "only value is available for unlabeled data"
                )
            labeled = LabeledDatasetView(data, table.truth)
            print(f"misc={misclassification(rule, labeled):.6f}")
        else:
            raise UsageError(f"unknown metric {metric!r} (choose from value, misc)")
    return 0


class LabeledDatasetView:
    """Duck-typed stand-in for a labeled dataset built from CSV columns."""

    def __init__(self, data: Dataset, truth: np.ndarray):
        self.data = data
        self.truth = np.asarray(truth, dtype=np.int64)


def cmd_tune(args) -> int:
    opt = _merge_config(
        args,
        {
            "train": None,
            "tune": None,
            "model": None,
            "method": "gowl",
            "kernel": "linear",
            "lam_grid": None,
            "sigma_grid": None,
            "strategy": "full",
            "k": None,
            "criterion": "value",
            "propensity": "auto",
            "propensity_floor": DEFAULT_FLOOR,
            "shift_margin": 0.1,
            "kkt_tol": 1e-5,
            "config": None,
        },
    )
    if not opt["train"] or not opt["tune"]:
        raise UsageError("tune requires --train and --tune")
    train_tab = read_table(opt["train"])
    tune_tab = read_table(opt["tune"])
    source = opt["propensity"].replace("-", "_")
    floor = float(opt["propensity_floor"])
    train = _build_dataset(train_tab, opt["k"], source, floor)
    tune_data = _build_dataset(tune_tab, train.K, source, floor)
    tune_set = (
        LabeledDatasetView(tune_data, tune_tab.truth)
        if tune_tab.truth is not None
        else tune_data
    )
    if opt["criterion"] == "misc" and tune_tab.truth is None:
        raise UsageError("criterion 'misc' needs a truth column in the tuning data")

    kernel_kind = "linear" if opt["method"] == "pls_l1" else opt["kernel"]
    lams = _as_floats(opt["lam_grid"], "lam-grid")
    sigmas = _as_floats(opt["sigma_grid"], "sigma-grid")
    if lams and kernel_kind == "gaussian":
        grid = tuple(GridCell(lam, s) for lam in lams for s in (sigmas or (0.1, 1.0, 10.0)))
    elif lams:
        grid = tuple(GridCell(lam) for lam in lams)
    else:
        grid = default_grid(kernel_kind, train.n, sigmas=sigmas or (0.1, 1.0, 10.0))

    res = tune(
        train,
        tune_set if opt["criterion"] == "misc" else tune_data,
        method=opt["method"],
        grid=grid,
        criterion=opt["criterion"],
        strategy=opt["strategy"],
        shift_margin=float(opt["shift_margin"]),
        kkt_tol=float(opt["kkt_tol"]),
    )
    sigma_txt = "none" if res.cell.sigma is None else _fmt(res.cell.sigma)
    score = res.scores[res.best_index]
    print(
        f"selected lam={_fmt(res.cell.lam)} sigma={sigma_txt} "
        f"{opt['criterion']}={score:.6f} ({len(grid)} cells)"
    )
    for cell, err in zip(res.cells, res.errors):
        if err is not None:
            print(f"  cell lam={_fmt(cell.lam)} failed: {err}", file=sys.stderr)
    if opt["model"]:
        _check_converged(res.rule, float(opt["kkt_tol"]))
        save_model(
            opt["model"],
            res.rule,
            method=opt["method"],
            strategy=opt["strategy"] if opt["method"] == "gowl" else None,
        )
        print(f"wrote model to {opt['model']}")
    return 0


def cmd_bench(args) -> int:
    opt = _merge_config(
        args,
        {
            "scenarios": None,
            "n": None,
            "reps": 20,
            "methods": "gowl",
            "kernel": "linear",
            "sigma_grid": None,
            "lam_multipliers": None,
            "seed": 0,
            "strategy": "full",
            "shift_margin": 0.1,
            "test_factor": 10,
            "threads": None,
            "out": None,
            "config": None,
        },
    )
    if not opt["scenarios"] or opt["n"] is None:
        raise UsageError("bench requires --scenarios and --n")
    scenarios = _as_strings(opt["scenarios"])
    for sc in scenarios:
        if sc not in SCENARIO_IDS:
            raise UsageError(f"unknown scenario {sc!r}; valid ids: {', '.join(SCENARIO_IDS)}")
    methods = _as_strings(opt["methods"])
    for method in methods:
        if method not in ("gowl", "owl", "pls_l1"):
            raise UsageError(f"unknown method {method!r} (choose from gowl, owl, pls_l1)")
    threads = int(opt["threads"]) if opt["threads"] is not None else _env_threads()
    reps = int(opt["reps"])
    sigmas = _as_floats(opt["sigma_grid"], "sigma-grid") or (0.1, 1.0, 10.0)
    multipliers = _as_floats(opt["lam_multipliers"], "lam-multipliers") or (
        0.1,
        1.0,
        10.0,
        100.0,
        500.0,
    )

    header = (
        f"{'scenario':<9} {'method':<7} {'kernel':<9} {'reps':>4} "
        f"{'misc':>8} {'misc_sd':>8} {'value_mse':>10} {'value':>8}"
    )
    lines = [header, "-" * len(header)]
    for sc in scenarios:
        for method in methods:
            try:
                rep = benchmark(
                    sc,
                    int(opt["n"]),
                    method=method,
                    kernel_kind=opt["kernel"],
                    reps=reps,
                    master_seed=int(opt["seed"]),
                    lam_multipliers=multipliers,
                    sigmas=sigmas,
                    strategy=opt["strategy"],
                    shift_margin=float(opt["shift_margin"]),
                    n_test_factor=int(opt["test_factor"]),
                    threads=threads,
                )
            except (ValueError, RuntimeError) as exc:
                lines.append(f"{sc:<9} {method:<7} {opt['kernel']:<9} failed: {exc}")
                continue
            sd_note = "*" if reps == 1 else ""
            lines.append(
                f"{sc:<9} {method:<7} {rep.kernel_kind:<9} {reps:>4} "
                f"{rep.misc_mean:>8.4f} {rep.misc_sd:>7.4f}{sd_note} "
                f"{rep.value_mse:>10.4f} {rep.value_fitted_mean:>8.4f}"
            )
    if reps == 1:
        lines.append("* single replicate: sd is reported as 0")
    report = "\n".join(lines)
    print(report)
    if opt["out"]:
        Path(opt["out"]).write_text(report + "\n")
    return 0


# ----------------------------------------------------------------- parser


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON file with option defaults (flags override)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ordinal-itr",
        description="Individualized treatment rules for ordinal treatments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("simulate", help="write train/tune/test CSVs for a scenario")
    s.add_argument("--scenario", help=f"one of {', '.join(SCENARIO_IDS)}")
    s.add_argument("--n", type=int, help="training (and tuning) sample size")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output directory")
    s.add_argument("--test-factor", type=int, dest="test_factor")
    _add_common(s)
    s.set_defaults(func=cmd_simulate)

    f = subs.add_parser("fit", help="fit a rule on a CSV and save a model file")
    f.add_argument("--data")
    f.add_argument("--model", help="output model path")
    f.add_argument("--method", choices=["gowl", "owl", "pls_l1"])
    f.add_argument("--kernel", choices=["linear", "gaussian"])
    f.add_argument("--sigma", type=float)
    f.add_argument("--lam", type=float)
    f.add_argument("--strategy", choices=["full", "partial"])
    f.add_argument("--k", type=int, help="number of treatment levels (default: max observed)")
    f.add_argument(
        "--propensity",
        choices=["auto", "column", "uniform", "empirical", "proportional-odds"],
    )
    f.add_argument("--propensity-floor", type=float, dest="propensity_floor")
    f.add_argument("--shift-margin", type=float, dest="shift_margin")
    f.add_argument("--kkt-tol", type=float, dest="kkt_tol")
    _add_common(f)
    f.set_defaults(func=cmd_fit)

    pr = subs.add_parser("predict", help="append predicted_treatment to a CSV")
    pr.add_argument("--model")
    pr.add_argument("--data")
    pr.add_argument("--out")
    _add_common(pr)
    pr.set_defaults(func=cmd_predict)

    ev = subs.add_parser("evaluate", help="report value / misclassification of a model")
    ev.add_argument("--model")
    ev.add_argument("--data")
    ev.add_argument("--metrics", help="comma list from {value, misc}; default auto")
    ev.add_argument(
        "--propensity",
        choices=["auto", "column", "uniform", "empirical", "proportional-odds"],
    )
    ev.add_argument("--propensity-floor", type=float, dest="propensity_floor")
    _add_common(ev)
    ev.set_defaults(func=cmd_evaluate)

    tu = subs.add_parser("tune", help="grid search on a train/tune CSV pair")
    tu.add_argument("--train")
    tu.add_argument("--tune")
    tu.add_argument("--model", help="optional output model path for the winner")
    tu.add_argument("--method", choices=["gowl", "owl", "pls_l1"])
    tu.add_argument("--kernel", choices=["linear", "gaussian"])
    tu.add_argument("--lam-grid", dest="lam_grid", help="comma list of lambda values")
    tu.add_argument("--sigma-grid", dest="sigma_grid", help="comma list of sigma values")
    tu.add_argument("--strategy", choices=["full", "partial"])
    tu.add_argument("--k", type=int)
    tu.add_argument("--criterion", choices=["value", "misc"])
    tu.add_argument(
        "--propensity",
        choices=["auto", "column", "uniform", "empirical", "proportional-odds"],
    )
    tu.add_argument("--propensity-floor", type=float, dest="propensity_floor")
    tu.add_argument("--shift-margin", type=float, dest="shift_margin")
    tu.add_argument("--kkt-tol", type=float, dest="kkt_tol")
    _add_common(tu)
    tu.set_defaults(func=cmd_tune)

    be = subs.add_parser("bench", help="replicate the simulation benchmarks")
    be.add_argument("--scenarios", help="comma list of scenario ids")
    be.add_argument("--n", type=int, help="training sample size")
    be.add_argument("--reps", type=int)
    be.add_argument("--methods", help="comma list from {gowl, owl, pls_l1}")
    be.add_argument("--kernel", choices=["linear", "gaussian"])
    be.add_argument("--sigma-grid", dest="sigma_grid")
    be.add_argument("--lam-multipliers", dest="lam_multipliers")
    be.add_argument("--seed", type=int)
    be.add_argument("--strategy", choices=["full", "partial"])
    be.add_argument("--shift-margin", type=float, dest="shift_margin")
    be.add_argument("--test-factor", type=int, dest="test_factor")
    be.add_argument("--threads", type=int, help="default: ORDINAL_ITR_THREADS or 1")
    be.add_argument("--out", help="also write the table to this path")
    _add_common(be)
    be.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
