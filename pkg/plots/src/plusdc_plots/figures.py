"""Deterministic figure rendering: PNG + SVG plus a numeric sidecar.

Every figure function writes the image in the requested formats and a
``*.data.json`` sidecar holding exactly the numbers that were plotted,
so the rendering can be audited without parsing the image.  Rendering is
reproducible byte for byte: fixed style, fixed SVG hash salt, and no
timestamps in the output metadata.

No statistic beyond mean / sample-deviation re-aggregation of the input
rows is computed here; the sidecar values match the producing side's own
JSON summaries.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .readers import (
    SchemaError,
    aggregate_consistency,
    aggregate_cv,
    read_consistency_csv,
    read_cv_csv,
)

_RC = {
    "svg.hashsalt": "plusdc-plots",
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
}
_PNG_METADATA = {"Software": "plusdc-plots"}
_SVG_METADATA = {"Date": None, "Creator": "plusdc-plots"}
_FORMATS = ("png", "svg")


def _out_base(out: str | Path) -> Path:
    out = Path(out)
    if out.suffix in {".png", ".svg", ".json"}:
        out = out.with_suffix("")
    return out


def _save(fig, out: str | Path, payload: dict, formats=_FORMATS) -> list[Path]:
    base = _out_base(out)
    base.parent.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt not in _FORMATS:
            raise SchemaError(f"unsupported figure format {fmt!r}; use png or svg")
        path = base.with_suffix(f".{fmt}")
        metadata = _PNG_METADATA if fmt == "png" else _SVG_METADATA
        with plt.rc_context(_RC):
            fig.savefig(path, format=fmt, metadata=dict(metadata))
        written.append(path)
    plt.close(fig)
    sidecar = base.with_suffix(".data.json")
    sidecar.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    written.append(sidecar)
    return written


# ---------------------------------------------------------------------------
# consistency study


def build_consistency_figure(rows: list[dict]):
    """Error-decay panels per design; returns (figure, sidecar payload)."""
    agg = aggregate_consistency(rows)
    designs: list[str] = []
    for entry in agg:
        if entry["design"] not in designs:
            designs.append(entry["design"])
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(
            1, len(designs), figsize=(4.4 * len(designs), 3.4), squeeze=False
        )
        panels = []
        for ax, design in zip(axes[0], designs):
            entries = sorted(
                (e for e in agg if e["design"] == design), key=lambda e: e["n"]
            )
            panel = {
                "design": design,
                "n": [e["n"] for e in entries],
                "mean_err_u_inf": [e["mean_err_u_inf"] for e in entries],
                "sd_err_u_inf": [e["sd_err_u_inf"] for e in entries],
                "mean_err_v_inf": [e["mean_err_v_inf"] for e in entries],
                "sd_err_v_inf": [e["sd_err_v_inf"] for e in entries],
                "n_ok": [e["n_ok"] for e in entries],
                "n_failed": [e["n_failed"] for e in entries],
            }
            panels.append(panel)
            for key, label, marker in (
                ("err_u_inf", "utility error", "o"),
                ("err_v_inf", "weight error", "s"),
            ):
                pts = [
                    (e["n"], e[f"mean_{key}"], e[f"sd_{key}"] or 0.0)
                    for e in entries
                    if e[f"mean_{key}"] is not None
                ]
                if not pts:
                    continue
                x = np.array([p[0] for p in pts], dtype=float)
                mean = np.array([p[1] for p in pts])
                sd = np.array([p[2] for p in pts])
                (line,) = ax.plot(x, mean, marker=marker, label=label)
                ax.fill_between(x, mean - sd, mean + sd, alpha=0.25,
                                color=line.get_color(), linewidth=0)
            ax.set_xticks(panel["n"])
            ax.set_xlabel("objects n")
            ax.set_ylabel("mean sup-norm error")
            ax.set_title(design)
            ax.legend()
        fig.tight_layout()
    payload = {"figure": "consistency", "sd_kind": "sample", "panels": panels}
    return fig, payload


def plot_consistency(csv_path: str | Path, out: str | Path, *, formats=_FORMATS) -> dict:
    """Render error-decay curves from a consistency-study CSV."""
    rows = read_consistency_csv(csv_path)
    fig, payload = build_consistency_figure(rows)
    _save(fig, out, payload, formats)
    return payload


# ---------------------------------------------------------------------------
# cross-validation


def build_cv_figure(series: list[tuple[str, list[dict]]]):
    """Per-mode panels of fold scores, one line per labelled run."""
    if not series:
        raise SchemaError("no cross-validation inputs given")
    modes: list[str] = []
    for _, rows in series:
        for row in rows:
            if row["mode"] not in modes:
                modes.append(row["mode"])
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(
            1, len(modes), figsize=(4.4 * len(modes), 3.4), squeeze=False
        )
        panels = []
        for ax, mode in zip(axes[0], modes):
            panel_series = []
            all_folds: list[int] = []
            for label, rows in series:
                agg = aggregate_cv(rows)
                ok = sorted(
                    (r for r in rows if r["mode"] == mode and r["status"] == "ok"),
                    key=lambda r: r["fold"],
                )
                folds = [r["fold"] for r in ok]
                nll = [r["mean_nll"] for r in ok]
                all_folds.extend(folds)
                entry = agg.get(mode, {"mean_nll": None, "sd_nll": None, "n_folds": 0})
                panel_series.append(
                    {
                        "label": label,
                        "folds": folds,
                        "nll": nll,
                        "mean_nll": entry["mean_nll"],
                        "sd_nll": entry["sd_nll"],
                        "n_folds": entry["n_folds"],
                    }
                )
                if folds:
                    ax.plot(folds, nll, marker="o", label=label)
            panels.append({"mode": mode, "series": panel_series})
            ax.set_xticks(sorted(set(all_folds)))
            ax.set_xlabel("fold")
            ax.set_ylabel("held-out NLL per comparison")
            ax.set_title(mode)
            ax.legend()
        fig.tight_layout()
    payload = {"figure": "cv", "sd_kind": "sample", "panels": panels}
    return fig, payload


def plot_cv(
    inputs: list[tuple[str, str | Path]], out: str | Path, *, formats=_FORMATS
) -> dict:
    """Render per-fold score series from one or more cross-validation CSVs."""
    series = [(label, read_cv_csv(path)) for label, path in inputs]
    fig, payload = build_cv_figure(series)
    _save(fig, out, payload, formats)
    return payload


# ---------------------------------------------------------------------------
# age-effect curve


def age_effect_curve(coefficients, basis, t):
    """Radial-basis expansion sum_k c_k * exp(-lam_k * (t - a_k)^2).

    Args:
        coefficients: Fitted weights, one per basis function.
        basis: Sequence of (center a, decay lam) pairs; lam >= 0.
        t: Evaluation points (scalar or array).
    """
    coefficients = np.asarray(coefficients, dtype=np.float64)
    basis = [(float(a), float(lam)) for a, lam in basis]
    if coefficients.shape[0] != len(basis):
        raise SchemaError(
            f"basis/coefficient length mismatch: {len(basis)} basis functions, "
            f"{coefficients.shape[0]} coefficients"
        )
    for a, lam in basis:
        if lam < 0:
            raise SchemaError(f"basis decay must be nonnegative, got {lam}")
    t = np.asarray(t, dtype=np.float64)
    total = np.zeros_like(t)
    for c, (a, lam) in zip(coefficients, basis):
        total = total + c * np.exp(-lam * (t - a) ** 2)
    return total


def build_age_figure(coefficients, basis, t_grid):
    effect = age_effect_curve(coefficients, basis, t_grid)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.8, 3.4))
        ax.plot(t_grid, effect)
        ax.axhline(0.0, color="gray", linewidth=0.8, linestyle="--")
        ax.set_xlabel("age t")
        ax.set_ylabel("estimated age effect")
        fig.tight_layout()
    payload = {
        "figure": "age_effect",
        "basis": [[a, lam] for a, lam in basis],
        "coefficients": [float(c) for c in np.asarray(coefficients, dtype=np.float64)],
        "t": [float(x) for x in t_grid],
        "effect": [float(y) for y in effect],
    }
    return fig, payload


def plot_age_effect(
    coefficients,
    basis,
    out: str | Path,
    *,
    t_min: float = 15.0,
    t_max: float = 45.0,
    n_points: int = 301,
    formats=_FORMATS,
) -> dict:
    """Render the fitted age-effect curve over [t_min, t_max]."""
    if not t_max > t_min:
        raise SchemaError(f"need t_max > t_min, got [{t_min}, {t_max}]")
    if n_points < 2:
        raise SchemaError(f"need at least 2 curve points, got {n_points}")
    basis = [(float(a), float(lam)) for a, lam in basis]
    t_grid = np.linspace(t_min, t_max, n_points)
    fig, payload = build_age_figure(coefficients, basis, t_grid)
    _save(fig, out, payload, formats)
    return payload
