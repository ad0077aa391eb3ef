"""Command-line interface: fitting, prediction, diagnostics, simulation, experiments.

Exit codes (stable for scripting):

* 0  success (for ``fit``: converged maximizer found)
* 2  fit detected that no maximizer exists
* 3  fit stopped without converging (iteration budget or numerical failure)
* 64 usage or data error (bad flags, malformed files, invalid configuration)

Every command that writes artifacts also writes a ``*.manifest.json``
sidecar (or ``manifest.json`` inside a ``--out`` directory) recording the
command, argument vector, seeds, input digests, tool version, and wall
time.  Commands that need a seed read ``--seed`` first and fall back to
the ``PLUSDC_SEED`` environment variable, then to 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import design, estimate, experiments, hypergraph, io, model
from .errors import CapabilityError, ConfigError, DomainError, InputError, NumericError, PlusDCError
from .randgraph import derive_rng, sample_experiment_design

EXIT_OK = 0
EXIT_NONEXISTENT = 2
EXIT_NONCONVERGED = 3
EXIT_USAGE = 64

_thread_controller = None  # keeps a threadpoolctl limiter alive for the process


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the data-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# shared helpers


def _resolve_seed(value: int | None) -> int:
    """--seed flag, else PLUSDC_SEED env var, else 0."""
    if value is not None:
        return int(value)
    env = os.environ.get("PLUSDC_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise InputError(f"PLUSDC_SEED must be an integer, got {env!r}") from exc


def _apply_thread_cap(n_threads: int | None) -> None:
    """Cap numeric-library worker pools for this process."""
    if n_threads is None:
        return
    if n_threads < 1:
        raise InputError(f"--threads must be >= 1, got {n_threads}")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n_threads)
    global _thread_controller
    try:
        from threadpoolctl import threadpool_limits

        _thread_controller = threadpool_limits(limits=n_threads)
    except ImportError:
        pass  # env vars still cap pools created after this point


def _manifest_path(artifact: Path) -> Path:
    return artifact.with_suffix(".manifest.json")


def _write_manifest(
    path: Path,
    args: argparse.Namespace,
    *,
    seeds: dict[str, int] | None,
    inputs: list[str | Path],
    t0: float,
) -> None:
    io.write_manifest(
        path,
        command=args.command,
        argv=list(args.raw_argv),
        seeds=seeds,
        inputs=inputs,
        version=__version__,
        wall_time_s=time.time() - t0,
    )


def _int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise InputError(f"{flag} expects comma-separated integers, got {text!r}") from exc


def _float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise InputError(f"{flag} expects comma-separated numbers, got {text!r}") from exc


def _emit_json(payload: dict, out: str | None, args, *, seeds=None, inputs=(), t0: float) -> None:
    """Print a JSON report; also save it (plus manifest) when --out is given."""
    text = json.dumps(payload, indent=2)
    print(text)
    if out is not None:
        out_path = Path(out)
        out_path.write_text(text + "\n", encoding="utf-8")
        _write_manifest(_manifest_path(out_path), args, seeds=seeds, inputs=list(inputs), t0=t0)


def _graph_topology(graph: hypergraph.Hypergraph, lam: float | None) -> dict:
    """Connectivity plus capped Cheeger constant / threshold diameter."""
    report: dict = {"connected": graph.is_connected()}
    try:
        report["cheeger"] = float(hypergraph.cheeger_constant(graph))
    except CapabilityError as exc:
        report["cheeger"] = None
        report["cheeger_reason"] = str(exc)
    if lam is not None:
        if not 0.0 < lam <= 1.0:
            raise InputError(f"--lam must be in (0, 1], got {lam}")
        report["lam"] = lam
        try:
            report["diameter"] = int(hypergraph.weakly_admissible_diameter(graph, lam))
        except CapabilityError as exc:
            report["diameter"] = None
            report["diameter_reason"] = str(exc)
    return report


# ---------------------------------------------------------------------------
# fit


def cmd_fit(args) -> int:
    t0 = time.time()
    dataset = io.read_comparisons_csv(args.data)
    config = estimate.FitConfig(
        epsilon=args.epsilon,
        max_outer=args.max_outer,
        existence_check=args.existence,
    )
    result = estimate.fit(dataset, config)
    meta = {
        "n": dataset.n,
        "d": dataset.d,
        "n_comparisons": dataset.n_comparisons,
        "converged": result.converged,
        "n_outer": int(result.n_outer),
        "loglik": float(result.loglik),
        "loglik_norm": float(result.loglik_norm),
        "grad_norm": float(result.grad_norm),
        "existence": result.existence,
        "epsilon": config.epsilon,
        "max_outer": config.max_outer,
        "existence_check": config.existence_check,
    }
    if result.converged:
        crit = estimate.aic_bic(result, dataset)
        meta["aic_norm"] = float(crit["aic_norm"])
        meta["bic_norm"] = float(crit["bic_norm"])
    out_path = Path(args.out)
    io.write_params_json(
        out_path, model.Params(u=result.params.u, v=result.params.v, meta=meta)
    )
    if args.trace is not None:
        with open(args.trace, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("outer,loglik,loglik_norm,gain\n")
            for entry in result.trace:
                gain = "" if not np.isfinite(entry["gain"]) else repr(entry["gain"])
                fh.write(
                    f"{entry['outer']},{entry['loglik']!r},{entry['loglik_norm']!r},{gain}\n"
                )
    _write_manifest(
        _manifest_path(out_path), args, seeds=None, inputs=[args.data], t0=t0
    )
    print(
        f"converged={result.converged} existence={result.existence} "
        f"n_outer={result.n_outer} loglik_norm={result.loglik_norm:.6f} "
        f"grad_norm={result.grad_norm:.3e}"
    )
    if result.existence == "nonexistent":
        return EXIT_NONEXISTENT
    if not result.converged:
        return EXIT_NONCONVERGED
    return EXIT_OK


# ---------------------------------------------------------------------------
# predict


def cmd_predict(args) -> int:
    t0 = time.time()
    params = io.read_params_json(args.params)
    dataset = io.read_comparisons_csv(args.data)
    n = params.u.shape[0]
    if dataset.d != params.v.shape[0]:
        raise InputError(
            f"covariate dimension mismatch: data has d={dataset.d}, "
            f"parameters have d={params.v.shape[0]}"
        )
    for comp in dataset.comparisons:
        for obj in comp.edge:
            if obj > n:
                raise InputError(
                    f"unknown object id {obj}: parameters cover ids 1..{n}"
                )
    if args.ranking:
        missing = [i for i, c in enumerate(dataset.comparisons, start=1) if c.outcome is None]
        if missing:
            raise InputError(
                f"--ranking needs observed outcomes; comparison {missing[0]} has none"
            )
    out_path = Path(args.out)
    header = ["comparison_id", "object_id", "p_top1"]
    if args.ranking:
        header.append("ranking_prob")
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for cid, comp in enumerate(dataset.comparisons, start=1):
            scores = model.score(params, comp)
            shifted = np.exp(scores - scores.max())
            p_top1 = shifted / shifted.sum()
            if args.ranking:
                rank_p = float(np.exp(model.ranking_log_prob(params, comp, comp.outcome)))
            for obj, p in zip(comp.edge, p_top1):
                row = f"{cid},{obj},{float(p)!r}"
                if args.ranking:
                    row += f",{rank_p!r}"
                fh.write(row + "\n")
    _write_manifest(
        _manifest_path(out_path), args, seeds=None, inputs=[args.params, args.data], t0=t0
    )
    print(f"wrote win probabilities for {dataset.n_comparisons} comparisons to {out_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# check / graph-stats


def cmd_check(args) -> int:
    t0 = time.time()
    dataset = io.read_comparisons_csv(args.data)
    dm = design.assemble(dataset)
    ident = design.identifiability_check(dm)
    curl = design.curl_sufficient_check(dm)
    diag = design.consistency_diagnostics(dm)
    report = {
        "n": dataset.n,
        "d": dataset.d,
        "n_comparisons": dataset.n_comparisons,
        "identifiable": bool(ident.identifiable),
        "rank": int(ident.rank),
        "required_rank": int(ident.required_rank),
        "curl_pass": bool(curl.passes),
        "curl": {
            "passes": bool(curl.passes),
            "inconclusive": bool(curl.inconclusive),
            "n_triangles": int(curl.n_triangles),
            "triangles": [[int(v) for v in tri] for tri in curl.triangles],
            "det": None if curl.det is None else float(curl.det),
            "reason": curl.reason,
        },
        "sigma_min_K": None if diag["sigma_min_K"] is None else float(diag["sigma_min_K"]),
        "incoherence_cos": None if diag["incoherence_cos"] is None else float(diag["incoherence_cos"]),
    }
    report.update(_graph_topology(dataset.graph(), args.lam))
    _emit_json(report, args.out, args, inputs=[args.data], t0=t0)
    return EXIT_OK


def cmd_graph_stats(args) -> int:
    t0 = time.time()
    graph = io.read_graph_csv(args.graph)
    degrees = graph.degrees()
    sizes: dict[str, int] = {}
    for edge in graph.edges:
        key = str(len(edge))
        sizes[key] = sizes.get(key, 0) + 1
    report = {
        "n": graph.n,
        "n_edges": len(graph.edges),
        "size_counts": dict(sorted(sizes.items(), key=lambda kv: int(kv[0]))),
        "min_degree": int(degrees.min()),
        "max_degree": int(degrees.max()),
        "mean_degree": float(degrees.mean()),
    }
    report.update(_graph_topology(graph, args.lam))
    _emit_json(report, args.out, args, inputs=[args.graph], t0=t0)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulation


def cmd_simulate_graph(args) -> int:
    t0 = time.time()
    seed = _resolve_seed(args.seed)
    graph, meta = sample_experiment_design(
        args.design, args.n, seed, stream=args.stream, n_edges=args.edges
    )
    out_path = Path(args.out)
    io.write_graph_csv(out_path, graph)
    meta_path = out_path.with_suffix(".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    _write_manifest(
        _manifest_path(out_path), args, seeds={"seed": seed}, inputs=[], t0=t0
    )
    print(f"sampled {meta['n_edges']} comparisons on {graph.n} objects ({args.design}, seed {seed})")
    return EXIT_OK


def cmd_simulate_data(args) -> int:
    t0 = time.time()
    seed = _resolve_seed(args.seed)
    graph = io.read_graph_csv(args.graph)
    if args.params is not None:
        truth = io.read_params_json(args.params)
        if truth.u.shape[0] != graph.n:
            raise InputError(
                f"parameter file covers {truth.u.shape[0]} objects, graph has {graph.n}"
            )
        d = truth.v.shape[0]
    else:
        if args.d is None:
            raise InputError("simulate-data needs --params or --d")
        d = args.d
        truth = model.Params(u=np.zeros(graph.n), v=np.zeros(d))
    dataset = experiments.simulate_covariates(graph, d, derive_rng(seed, 0))
    dataset = experiments.simulate_outcomes(dataset, truth, derive_rng(seed, 1))
    out_path = Path(args.out)
    io.write_comparisons_csv(out_path, dataset)
    inputs = [args.graph] + ([args.params] if args.params is not None else [])
    _write_manifest(
        _manifest_path(out_path), args, seeds={"seed": seed}, inputs=inputs, t0=t0
    )
    print(f"simulated {dataset.n_comparisons} outcomes (d={d}, seed {seed})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiments


def cmd_experiment(args) -> int:
    t0 = time.time()
    if args.study != "consistency":
        raise InputError(f"unknown study {args.study!r}; available: consistency")
    seed = _resolve_seed(args.seed)
    spec = experiments.ConsistencySpec(
        design=args.design,
        n_list=tuple(_int_list(args.n, "--n")),
        reps=args.reps,
        seed=seed,
        v_star=tuple(_float_list(args.v_star, "--v-star")),
        fit_config=estimate.FitConfig(epsilon=args.epsilon),
    )
    result = experiments.run_consistency(spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    experiments.write_consistency_csv(out_dir / "consistency.csv", result)
    experiments.write_consistency_json(out_dir / "consistency.json", result)
    _write_manifest(out_dir / "manifest.json", args, seeds={"seed": seed}, inputs=[], t0=t0)
    for entry in result.summary["per_n"]:
        print(
            f"n={entry['n']} n_comparisons={entry['n_comparisons']} "
            f"mean_err_u_inf={entry['mean_err_u_inf']} mean_err_v_inf={entry['mean_err_v_inf']} "
            f"failed={entry['n_failed']}"
        )
    return EXIT_OK


def cmd_cv(args) -> int:
    t0 = time.time()
    seed = _resolve_seed(args.seed)
    dataset = io.read_comparisons_csv(args.data)
    spec = experiments.CvSpec(
        k=args.k,
        modes=tuple(args.modes.split(",")),
        seed=seed,
        cold_start=args.cold_start,
        fit_config=estimate.FitConfig(epsilon=args.epsilon),
    )
    result = experiments.run_kfold_cv(dataset, spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    experiments.write_cv_csv(out_dir / "cv.csv", result)
    experiments.write_cv_json(out_dir / "cv.json", result)
    _write_manifest(out_dir / "manifest.json", args, seeds={"seed": seed}, inputs=[args.data], t0=t0)
    for mode, entry in result.summary["per_mode"].items():
        print(f"mode={mode} mean_nll={entry['mean_nll']} n_folds={entry['n_folds']}")
    return EXIT_OK


def _parse_subsets(text: str, d: int) -> list[tuple[int, ...]]:
    """--subsets grammar: 'all' or ';'-separated comma lists ('none' = no covariates)."""
    if text == "all":
        if d > 12:
            raise InputError(
                f"--subsets all would fit 2^{d} models; list subsets explicitly"
            )
        return [
            tuple(j + 1 for j in range(d) if mask >> j & 1) for mask in range(1 << d)
        ]
    subsets = []
    for part in text.split(";"):
        part = part.strip()
        if part in ("", "none"):
            subsets.append(())
        else:
            subsets.append(tuple(_int_list(part, "--subsets")))
    return subsets


def cmd_select(args) -> int:
    t0 = time.time()
    dataset = io.read_comparisons_csv(args.data)
    subsets = _parse_subsets(args.subsets, dataset.d)
    rows = experiments.model_selection(
        dataset, subsets, fit_config=estimate.FitConfig(epsilon=args.epsilon)
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    experiments.write_selection_csv(out_dir / "selection.csv", rows)
    experiments.write_selection_json(out_dir / "selection.json", rows)
    _write_manifest(out_dir / "manifest.json", args, seeds=None, inputs=[args.data], t0=t0)
    for row in rows:
        subset = "{" + ",".join(str(j) for j in row["subset"]) + "}"
        print(
            f"rank={row['rank']} subset={subset} status={row['status']} "
            f"bic_norm={row['bic_norm']}"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(
        prog="plusdc",
        description="Multiway comparison ranking with dynamic covariates.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--threads", type=int, default=None, metavar="N",
        help="cap numeric worker threads (default: library defaults)",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("fit", help="fit the model to a comparisons CSV")
    p.add_argument("--data", required=True, help="comparisons CSV")
    p.add_argument("--epsilon", type=float, default=1e-10, help="outer-loop gain tolerance")
    p.add_argument("--max-outer", type=int, default=1000, help="outer iteration budget")
    p.add_argument(
        "--existence", choices=["off", "divergence", "lp"], default="divergence",
        help="maximizer-existence check mode",
    )
    p.add_argument("--out", required=True, help="output parameter JSON")
    p.add_argument("--trace", default=None, help="optional per-iteration log-likelihood CSV")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="per-object win probabilities under fitted parameters")
    p.add_argument("--params", required=True, help="parameter JSON")
    p.add_argument("--data", required=True, help="comparisons CSV (ranks may be blank)")
    p.add_argument(
        "--ranking", action="store_true",
        help="also report the probability of each supplied ranking",
    )
    p.add_argument("--out", required=True, help="output probabilities CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("check", help="identifiability and design diagnostics report")
    p.add_argument("--data", required=True, help="comparisons CSV")
    p.add_argument(
        "--lam", type=float, default=0.5,
        help="threshold for the weak-admissibility diameter (default 0.5)",
    )
    p.add_argument("--out", default=None, help="optional JSON report path")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("graph-stats", help="degree/size/topology statistics of a graph CSV")
    p.add_argument("--graph", required=True, help="graph CSV")
    p.add_argument(
        "--lam", type=float, default=None,
        help="also report the weak-admissibility diameter at this threshold",
    )
    p.add_argument("--out", default=None, help="optional JSON report path")
    p.set_defaults(func=cmd_graph_stats)

    p = sub.add_parser("simulate-graph", help="sample a random comparison design")
    p.add_argument("--design", choices=["nurhm6", "hsbm2"], required=True)
    p.add_argument("--n", type=int, required=True, help="number of objects")
    p.add_argument("--seed", type=int, default=None, help="seed (default: PLUSDC_SEED or 0)")
    p.add_argument("--stream", type=int, default=0, help="seed sub-stream index")
    p.add_argument("--edges", type=int, default=None, help="override the design edge count")
    p.add_argument("--out", required=True, help="output graph CSV (metadata sidecar added)")
    p.set_defaults(func=cmd_simulate_graph)

    p = sub.add_parser("simulate-data", help="draw covariates and outcomes on a given graph")
    p.add_argument("--graph", required=True, help="graph CSV")
    p.add_argument("--params", default=None, help="ground-truth parameter JSON")
    p.add_argument("--d", type=int, default=None, help="covariate dimension (zero truth)")
    p.add_argument("--seed", type=int, default=None, help="seed (default: PLUSDC_SEED or 0)")
    p.add_argument("--out", required=True, help="output comparisons CSV")
    p.set_defaults(func=cmd_simulate_data)

    p = sub.add_parser("experiment", help="run a canned simulation study")
    p.add_argument("study", choices=["consistency"], help="study name")
    p.add_argument("--design", choices=["nurhm6", "hsbm2"], default="nurhm6")
    p.add_argument("--n", default="100,200,400", help="comma-separated object counts")
    p.add_argument("--reps", type=int, default=20, help="replicates per object count")
    p.add_argument("--v-star", default="1,-0.5,0", help="true covariate weights")
    p.add_argument("--epsilon", type=float, default=1e-8, help="fit tolerance")
    p.add_argument("--seed", type=int, default=None, help="seed (default: PLUSDC_SEED or 0)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("cv", help="k-fold cross-validated held-out likelihood")
    p.add_argument("--data", required=True, help="comparisons CSV")
    p.add_argument("--k", type=int, required=True, help="number of folds")
    p.add_argument("--modes", default="top1,top3,full", help="comma-separated scoring modes")
    p.add_argument(
        "--cold-start", choices=["error", "prior"], default="error",
        help="handling of training folds that miss an object",
    )
    p.add_argument("--epsilon", type=float, default=1e-8, help="fit tolerance")
    p.add_argument("--seed", type=int, default=None, help="fold-shuffle seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("select", help="rank covariate subsets by normalized BIC")
    p.add_argument("--data", required=True, help="comparisons CSV")
    p.add_argument(
        "--subsets", default="all",
        help="'all' or ';'-separated comma lists of covariate indices ('none' = empty)",
    )
    p.add_argument("--epsilon", type=float, default=1e-8, help="fit tolerance")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_select)

    return parser


def main(argv: list[str] | None = None) -> int:
    raw_argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(raw_argv)
    except SystemExit as exc:  # argparse exits itself on usage errors / --help
        return int(exc.code or 0)
    args.raw_argv = raw_argv
    try:
        _apply_thread_cap(args.threads)
        return args.func(args)
    except (InputError, ConfigError, DomainError, CapabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except PlusDCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
