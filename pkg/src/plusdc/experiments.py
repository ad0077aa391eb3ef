"""Reproducible studies: consistency, cross-validation, model selection.

All randomness flows through counter-based sub-streams of a root seed
(see randgraph.derive_rng), so every study is bit-reproducible.  Output
is a tidy table (one row per measurement) plus a JSON-ready summary;
figures are left to the separate plotting package.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import numpy.typing as npt

from .errors import ConfigError, InputError
from .estimate import FitConfig, fit, information_criteria
from .hypergraph import Hypergraph
from .model import Comparison, Dataset, Params, score, top_k_prob, ranking_log_prob
from .randgraph import derive_rng, sample_experiment_design

CV_COVERAGE_RETRIES = 20
_CV_MODES = ("top1", "top3", "full")


# ---------------------------------------------------------------------------
# simulation helpers


def simulate_covariates(graph: Hypergraph, d: int, rng: np.random.Generator) -> Dataset:
    """Attach i.i.d. standard-normal covariates to every incidence."""
    total = sum(len(e) for e in graph.edges)
    flat = rng.normal(size=(total, d))
    comparisons = []
    offset = 0
    for e in graph.edges:
        m = len(e)
        comparisons.append(
            Comparison(edge=e, covariates=flat[offset : offset + m], outcome=None)
        )
        offset += m
    return Dataset(n=graph.n, d=d, comparisons=tuple(comparisons))


def simulate_outcomes(
    dataset: Dataset, truth: Params, rng: np.random.Generator
) -> Dataset:
    """Draw one ranking per comparison from the model at `truth`.

    Sorting scores perturbed by standard Gumbel noise in decreasing
    order draws from exactly the sequential-choice distribution, and
    vectorizes better than choosing rank by rank.
    """
    total = sum(c.m for c in dataset.comparisons)
    noise = rng.gumbel(size=total)
    comparisons = []
    offset = 0
    for c in dataset.comparisons:
        s = score(truth, c) + noise[offset : offset + c.m]
        offset += c.m
        order = np.argsort(-s)
        comparisons.append(
            Comparison(
                edge=c.edge,
                covariates=c.covariates,
                outcome=tuple(c.edge[i] for i in order),
            )
        )
    return Dataset(n=dataset.n, d=dataset.d, comparisons=tuple(comparisons))


def restrict_covariates(dataset: Dataset, subset: Sequence[int]) -> Dataset:
    """Keep only the 1-based covariate columns in `subset` (may be empty)."""
    cols = list(subset)
    if len(set(cols)) != len(cols):
        raise InputError(f"covariate subset {cols} has duplicates")
    for j in cols:
        if not 1 <= j <= dataset.d:
            raise InputError(f"covariate index {j} outside 1..{dataset.d}")
    idx = [j - 1 for j in cols]
    comparisons = tuple(
        Comparison(edge=c.edge, covariates=c.covariates[:, idx], outcome=c.outcome)
        for c in dataset.comparisons
    )
    return Dataset(n=dataset.n, d=len(cols), comparisons=comparisons)


def rbf_covariate(t, a: float, lam: float):
    """Radial-basis feature exp(-lam * (t - a)^2); `t` may be an array."""
    if lam < 0:
        raise InputError(f"rbf rate must be nonnegative, got {lam}")
    t = np.asarray(t, dtype=np.float64)
    out = np.exp(-lam * (t - a) ** 2)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# consistency study


@dataclass(frozen=True)
class ConsistencySpec:
    """Synthetic error-decay study over increasing vertex counts.

    Each replicate draws a graph from the named design, utilities
    uniform on [-0.5, 0.5] (centered), standard-normal covariates, and
    outcomes from the model at (u*, v*); the fitted errors are recorded
    in the sup norm.
    """

    design: str = "nurhm6"
    n_list: tuple[int, ...] = (100, 200, 400)
    reps: int = 20
    seed: int = 0
    v_star: tuple[float, ...] = (1.0, -0.5, 0.0)
    fit_config: FitConfig = field(default_factory=lambda: FitConfig(epsilon=1e-8))

    def __post_init__(self) -> None:
        if self.design not in ("nurhm6", "hsbm2"):
            raise ConfigError(f"unknown design {self.design!r}")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if not self.n_list:
            raise ConfigError("n_list must be nonempty")


@dataclass
class ConsistencyResult:
    rows: list[dict]
    summary: dict


def _consistency_replicate(spec: ConsistencySpec, n: int, stream: int):
    graph, _ = sample_experiment_design(spec.design, n=n, seed=spec.seed, stream=2 * stream)
    rng = derive_rng(spec.seed, 2 * stream + 1)
    d = len(spec.v_star)
    u_star = rng.uniform(-0.5, 0.5, size=n)
    u_star -= u_star.mean()
    truth = Params(u=u_star, v=np.array(spec.v_star))
    ds = simulate_outcomes(simulate_covariates(graph, d, rng), truth, rng)
    return ds, truth


def run_consistency(spec: ConsistencySpec) -> ConsistencyResult:
    """Fit every replicate and tabulate sup-norm errors against truth.

    Replicates whose maximizer does not exist (or whose fit fails to
    converge) are recorded as failed, excluded from the means, and
    counted in the summary.
    """
    rows: list[dict] = []
    per_n: list[dict] = []
    for idx_n, n in enumerate(spec.n_list):
        errs_u, errs_v = [], []
        n_comparisons = None
        n_failed = 0
        for rep in range(spec.reps):
            stream = idx_n * spec.reps + rep
            ds, truth = _consistency_replicate(spec, n, stream)
            n_comparisons = ds.n_comparisons
            res = fit(ds, spec.fit_config)
            ok = res.converged and res.existence != "nonexistent"
            row = {
                "design": spec.design,
                "n": n,
                "rep": rep,
                "n_comparisons": ds.n_comparisons,
                "status": "ok" if ok else "failed",
                "err_u_inf": None,
                "err_v_inf": None,
            }
            if ok:
                row["err_u_inf"] = float(np.abs(res.params.u - truth.u).max())
                row["err_v_inf"] = float(np.abs(res.params.v - truth.v).max())
                errs_u.append(row["err_u_inf"])
                errs_v.append(row["err_v_inf"])
            else:
                n_failed += 1
            rows.append(row)
        per_n.append(
            {
                "n": n,
                "n_comparisons": n_comparisons,
                "n_ok": len(errs_u),
                "n_failed": n_failed,
                "mean_err_u_inf": float(np.mean(errs_u)) if errs_u else None,
                "sd_err_u_inf": float(np.std(errs_u, ddof=1)) if len(errs_u) > 1 else None,
                "mean_err_v_inf": float(np.mean(errs_v)) if errs_v else None,
                "sd_err_v_inf": float(np.std(errs_v, ddof=1)) if len(errs_v) > 1 else None,
            }
        )
    summary = {
        "design": spec.design,
        "seed": spec.seed,
        "reps": spec.reps,
        "d": len(spec.v_star),
        "v_star": list(spec.v_star),
        "sd_kind": "sample",
        "per_n": per_n,
    }
    return ConsistencyResult(rows=rows, summary=summary)


CONSISTENCY_COLUMNS = ["design", "n", "rep", "n_comparisons", "status", "err_u_inf", "err_v_inf"]


def write_consistency_csv(path: str | Path, result: ConsistencyResult) -> None:
    _write_tidy_csv(path, CONSISTENCY_COLUMNS, result.rows)


def write_consistency_json(path: str | Path, result: ConsistencyResult) -> None:
    Path(path).write_text(json.dumps(result.summary, indent=2) + "\n", encoding="utf-8")


def _write_tidy_csv(path: str | Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if row[c] is None else row[c] for c in columns])


# ---------------------------------------------------------------------------
# k-fold cross-validation


@dataclass(frozen=True)
class CvSpec:
    """Cross-validation settings.

    k = 1 is accepted as the degenerate evaluation-only path: fit on all
    data and score the training set itself.  cold_start selects what to
    do when no partition keeps every vertex in every training fold:
    "error" raises after the retry cap, "prior" scores held-out
    cold-start vertices with utility 0 and reports how many comparisons
    were affected.
    """

    k: int
    modes: tuple[str, ...] = ("top1", "top3", "full")
    seed: int = 0
    cold_start: str = "error"
    fit_config: FitConfig = field(default_factory=lambda: FitConfig(epsilon=1e-8))

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        bad = [m for m in self.modes if m not in _CV_MODES]
        if bad:
            raise ConfigError(f"unknown cv modes {bad}; choose from {_CV_MODES}")
        if not self.modes:
            raise ConfigError("modes must be nonempty")
        if self.cold_start not in ("error", "prior"):
            raise ConfigError(f"cold_start must be 'error' or 'prior', got {self.cold_start!r}")


@dataclass
class CvResult:
    rows: list[dict]
    summary: dict


def _partition(n_items: int, k: int, rng: np.random.Generator) -> list[npt.NDArray]:
    perm = rng.permutation(n_items)
    base = n_items // k
    folds = [perm[i * base : (i + 1) * base] for i in range(k - 1)]
    folds.append(perm[(k - 1) * base :])
    return folds


def _training_covers(dataset: Dataset, test_idx: npt.NDArray) -> bool:
    test = set(int(i) for i in test_idx)
    deg = np.zeros(dataset.n, dtype=np.int64)
    for i, c in enumerate(dataset.comparisons):
        if i in test:
            continue
        for vtx in c.edge:
            deg[vtx - 1] += 1
    return bool(np.all(deg > 0))


def _fit_training(train: list[Comparison], dataset: Dataset, cfg: FitConfig):
    """Fit on the training comparisons; returns (full-length params, ok).

    Vertices absent from training keep utility 0 (the centered prior);
    the fit itself runs on the compacted present-vertex problem.
    """
    deg = np.zeros(dataset.n, dtype=np.int64)
    for c in train:
        for vtx in c.edge:
            deg[vtx - 1] += 1
    present = np.flatnonzero(deg > 0) + 1
    if present.size == dataset.n:
        res = fit(Dataset(n=dataset.n, d=dataset.d, comparisons=tuple(train)), cfg)
        params = res.params
    else:
        remap = {int(old): new + 1 for new, old in enumerate(present)}
        compact = tuple(
            Comparison(
                edge=tuple(remap[vtx] for vtx in c.edge),
                covariates=c.covariates,
                outcome=tuple(remap[vtx] for vtx in c.outcome),
            )
            for c in train
        )
        res = fit(Dataset(n=present.size, d=dataset.d, comparisons=compact), cfg)
        u_full = np.zeros(dataset.n)
        u_full[present - 1] = res.params.u
        params = Params(u=u_full, v=res.params.v)
    ok = res.converged and res.existence != "nonexistent"
    return params, ok


def _mode_nll(params: Params, comparison: Comparison, mode: str) -> float:
    if mode == "full":
        return -ranking_log_prob(params, comparison, comparison.outcome)
    k = 1 if mode == "top1" else 3
    return -top_k_prob(params, comparison, min(k, comparison.m), log=True)


def run_kfold_cv(dataset: Dataset, spec: CvSpec) -> CvResult:
    """Per-fold held-out cross-entropy under the requested scoring modes.

    Folds partition the comparisons equally (the last fold takes the
    remainder).  Partitions are redrawn up to 20 times until every
    training fold keeps all vertices; what happens after that depends on
    spec.cold_start.

    Raises:
        ConfigError: k exceeds the number of comparisons, or coverage
            cannot be achieved and cold_start is "error".
    """
    n_obs = dataset.n_comparisons
    if spec.k > n_obs:
        raise ConfigError(f"k={spec.k} exceeds the {n_obs} comparisons")
    rng = derive_rng(spec.seed, 0)
    if spec.k == 1:
        folds = [np.arange(n_obs)]
        train_sets = [list(dataset.comparisons)]
    else:
        folds = None
        for _ in range(CV_COVERAGE_RETRIES):
            candidate = _partition(n_obs, spec.k, rng)
            if all(_training_covers(dataset, test) for test in candidate):
                folds = candidate
                break
        if folds is None:
            if spec.cold_start == "error":
                raise ConfigError(
                    f"no partition kept every vertex in every training fold after "
                    f"{CV_COVERAGE_RETRIES} attempts; use fewer folds (k={spec.k}) or "
                    f"cold_start='prior'"
                )
            folds = _partition(n_obs, spec.k, rng)
        train_sets = [
            [dataset.comparisons[i] for i in range(n_obs) if i not in set(map(int, test))]
            for test in folds
        ]
    rows: list[dict] = []
    for fold_idx, test_idx in enumerate(folds):
        train = train_sets[fold_idx]
        params, ok = _fit_training(train, dataset, spec.fit_config)
        train_vertices = {vtx for c in train for vtx in c.edge}
        n_cold = sum(
            1
            for i in test_idx
            if any(vtx not in train_vertices for vtx in dataset.comparisons[i].edge)
        )
        for mode in spec.modes:
            row = {
                "fold": fold_idx,
                "mode": mode,
                "n_test": int(len(test_idx)),
                "n_cold": int(n_cold),
                "status": "ok" if ok else "failed",
                "mean_nll": None,
            }
            if ok:
                vals = [
                    _mode_nll(params, dataset.comparisons[int(i)], mode)
                    for i in test_idx
                ]
                row["mean_nll"] = float(np.mean(vals))
            rows.append(row)
    per_mode = {}
    for mode in spec.modes:
        vals = [r["mean_nll"] for r in rows if r["mode"] == mode and r["status"] == "ok"]
        per_mode[mode] = {
            "mean_nll": float(np.mean(vals)) if vals else None,
            "sd_nll": float(np.std(vals, ddof=1)) if len(vals) > 1 else None,
            "n_folds": len(vals),
        }
    summary = {
        "k": spec.k,
        "seed": spec.seed,
        "modes": list(spec.modes),
        "cold_start": spec.cold_start,
        "sd_kind": "sample",
        "n_failed_folds": sum(
            1 for r in rows if r["mode"] == spec.modes[0] and r["status"] == "failed"
        ),
        "n_cold_total": int(sum(r["n_cold"] for r in rows if r["mode"] == spec.modes[0])),
        "per_mode": per_mode,
    }
    return CvResult(rows=rows, summary=summary)


CV_COLUMNS = ["fold", "mode", "n_test", "n_cold", "status", "mean_nll"]


def write_cv_csv(path: str | Path, result: CvResult) -> None:
    _write_tidy_csv(path, CV_COLUMNS, result.rows)


def write_cv_json(path: str | Path, result: CvResult) -> None:
    Path(path).write_text(json.dumps(result.summary, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# model selection


def model_selection(
    dataset: Dataset,
    subsets: Sequence[Sequence[int]],
    *,
    fit_config: FitConfig | None = None,
) -> list[dict]:
    """Fit one model per covariate subset and rank by normalized BIC.

    The empty subset is the covariate-free model.  Subsets whose fit
    does not converge or whose maximizer does not exist are flagged and
    placed after the ranked rows instead of aborting the table.
    """
    cfg = fit_config or FitConfig(epsilon=1e-8)
    ranked: list[dict] = []
    flagged: list[dict] = []
    for subset in subsets:
        sub = tuple(sorted(int(j) for j in subset))
        ds_sub = restrict_covariates(dataset, sub)
        res = fit(ds_sub, cfg)
        row = {
            "subset": list(sub),
            "status": "ok",
            "loglik_norm": None,
            "aic_norm": None,
            "bic_norm": None,
            "n_params": None,
        }
        if res.converged and res.existence != "nonexistent":
            crit = information_criteria(
                res.loglik_norm, ds_sub.n, ds_sub.d, ds_sub.n_comparisons
            )
            row.update(
                loglik_norm=crit["loglik_norm"],
                aic_norm=crit["aic_norm"],
                bic_norm=crit["bic_norm"],
                n_params=crit["n_params"],
            )
            ranked.append(row)
        else:
            row["status"] = "nonexistent" if res.existence == "nonexistent" else "nonconverged"
            flagged.append(row)
    ranked.sort(key=lambda r: r["bic_norm"])
    for rank, row in enumerate(ranked, start=1):
        row["rank"] = rank
    for row in flagged:
        row["rank"] = None
    return ranked + flagged


SELECTION_COLUMNS = ["rank", "subset", "status", "loglik_norm", "aic_norm", "bic_norm", "n_params"]


def write_selection_csv(path: str | Path, rows: list[dict]) -> None:
    out = [
        {**row, "subset": "{" + ",".join(str(j) for j in row["subset"]) + "}"}
        for row in rows
    ]
    _write_tidy_csv(path, SELECTION_COLUMNS, out)


def write_selection_json(path: str | Path, rows: list[dict]) -> None:
    Path(path).write_text(json.dumps({"models": rows}, indent=2) + "\n", encoding="utf-8")
