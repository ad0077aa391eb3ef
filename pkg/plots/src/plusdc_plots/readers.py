"""Typed readers for the tidy CSV and JSON files the fitter CLI writes.

File formats (all CSV has a header row, UTF-8, LF):

* Consistency study: columns
  ``design,n,rep,n_comparisons,status,err_u_inf,err_v_inf``; one row per
  replicate, error cells blank when the replicate failed.
* Cross-validation: columns ``fold,mode,n_test,n_cold,status,mean_nll``;
  one row per (fold, mode), ``mean_nll`` blank when the fold failed.
* Parameters: JSON object ``{"u": [...], "v": [...], "meta": {...}}``.

Aggregations reproduce the producing side exactly: means over rows with
status ``ok``; standard deviations use the sample convention (ddof=1)
and are None below two observations.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

CONSISTENCY_COLUMNS = ["design", "n", "rep", "n_comparisons", "status", "err_u_inf", "err_v_inf"]
CV_COLUMNS = ["fold", "mode", "n_test", "n_cold", "status", "mean_nll"]


class SchemaError(ValueError):
    """An input file does not match its documented layout."""


def _read_rows(path: str | Path, required: list[str]) -> list[dict[str, str]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    reader = csv.DictReader(text.splitlines())
    header = reader.fieldnames or []
    missing = [col for col in required if col not in header]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
    return list(reader)


def _opt_float(raw: str, path: Path | str, what: str) -> float | None:
    if raw == "" or raw is None:
        return None
    try:
        return float(raw)
    except ValueError as exc:
        raise SchemaError(f"{path}: {what} must be a number, got {raw!r}") from exc


def _req_int(raw: str, path: Path | str, what: str) -> int:
    try:
        return int(raw)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: {what} must be an integer, got {raw!r}") from exc


def read_consistency_csv(path: str | Path) -> list[dict]:
    """Replicate rows of a consistency study, with typed fields."""
    rows = []
    for raw in _read_rows(path, CONSISTENCY_COLUMNS):
        rows.append(
            {
                "design": raw["design"],
                "n": _req_int(raw["n"], path, "n"),
                "rep": _req_int(raw["rep"], path, "rep"),
                "n_comparisons": _req_int(raw["n_comparisons"], path, "n_comparisons"),
                "status": raw["status"],
                "err_u_inf": _opt_float(raw["err_u_inf"], path, "err_u_inf"),
                "err_v_inf": _opt_float(raw["err_v_inf"], path, "err_v_inf"),
            }
        )
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def read_cv_csv(path: str | Path) -> list[dict]:
    """Per-(fold, mode) rows of a cross-validation run, with typed fields."""
    rows = []
    for raw in _read_rows(path, CV_COLUMNS):
        rows.append(
            {
                "fold": _req_int(raw["fold"], path, "fold"),
                "mode": raw["mode"],
                "n_test": _req_int(raw["n_test"], path, "n_test"),
                "n_cold": _req_int(raw["n_cold"], path, "n_cold"),
                "status": raw["status"],
                "mean_nll": _opt_float(raw["mean_nll"], path, "mean_nll"),
            }
        )
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def read_params_json(path: str | Path) -> dict:
    """Parameter file as a dict with keys u (list), v (list), meta (dict)."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict) or "u" not in payload or "v" not in payload:
        raise SchemaError(f"{path}: expected an object with keys 'u' and 'v'")
    return {
        "u": [float(x) for x in payload["u"]],
        "v": [float(x) for x in payload["v"]],
        "meta": dict(payload.get("meta", {})),
    }


def _mean_sd(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    mean = float(np.mean(values))
    sd = float(np.std(values, ddof=1)) if len(values) >= 2 else None
    return mean, sd


def aggregate_consistency(rows: list[dict]) -> list[dict]:
    """Per-(design, n) means and sample deviations over successful replicates.

    Returns one entry per (design, n) in first-appearance order, with the
    same statistics the producing side reports in its JSON summary.
    """
    order: list[tuple[str, int]] = []
    groups: dict[tuple[str, int], list[dict]] = {}
    for row in rows:
        key = (row["design"], row["n"])
        if key not in groups:
            order.append(key)
            groups[key] = []
        groups[key].append(row)
    out = []
    for design, n in order:
        members = groups[(design, n)]
        ok = [r for r in members if r["status"] == "ok"]
        mean_u, sd_u = _mean_sd([r["err_u_inf"] for r in ok])
        mean_v, sd_v = _mean_sd([r["err_v_inf"] for r in ok])
        out.append(
            {
                "design": design,
                "n": n,
                "n_ok": len(ok),
                "n_failed": len(members) - len(ok),
                "mean_err_u_inf": mean_u,
                "sd_err_u_inf": sd_u,
                "mean_err_v_inf": mean_v,
                "sd_err_v_inf": sd_v,
            }
        )
    return out


def aggregate_cv(rows: list[dict]) -> dict[str, dict]:
    """Per-mode mean and sample deviation of fold scores, mirroring the producer."""
    modes: list[str] = []
    for row in rows:
        if row["mode"] not in modes:
            modes.append(row["mode"])
    out = {}
    for mode in modes:
        ok = [r for r in rows if r["mode"] == mode and r["status"] == "ok"]
        mean, sd = _mean_sd([r["mean_nll"] for r in ok])
        out[mode] = {"mean_nll": mean, "sd_nll": sd, "n_folds": len(ok)}
    return out
