"""File interchange: graph CSV, comparisons CSV, parameter JSON, manifests.

Formats (all CSV is UTF-8 with a header row and LF line endings):

* Graph file: columns ``comparison_id,object_id``, one row per incidence.
  The loader infers the vertex count and groups rows into edges.
* Comparisons file: columns ``comparison_id,rank,object_id,x1..xd``, one
  row per (comparison, object).  ``rank`` gives the observed ordering
  (1 = first); leaving every rank in a comparison empty encodes an
  outcome-free comparison (for prediction inputs).
* Parameters: JSON ``{"u": [...], "v": [...], "meta": {...}}``.
* Run manifest: JSON sidecar recording command, arguments, seeds, input
  digests, tool version, and wall time.

Schema violations raise InputError naming the offending row (1-based,
counting the header as row 1).
"""

from __future__ import annotations

import csv
import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError
from .hypergraph import Hypergraph
from .model import Comparison, Dataset, Params

GRAPH_COLUMNS = ["comparison_id", "object_id"]


def _open_rows(path: str | Path, expect_prefix: list[str]) -> tuple[list[str], list[tuple[int, list[str]]]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(text.splitlines())
    rows = [(i + 1, row) for i, row in enumerate(reader) if row]
    if not rows:
        raise InputError(f"{path}: empty file (expected a header row)")
    header = [h.strip() for h in rows[0][1]]
    if header[: len(expect_prefix)] != expect_prefix:
        raise InputError(
            f"{path}: row 1: header must start with {','.join(expect_prefix)}; got {','.join(header)}"
        )
    return header, rows[1:]


def _parse_int(value: str, path: Path, rownum: int, what: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise InputError(f"{path}: row {rownum}: {what} must be an integer, got {value!r}") from exc


def read_graph_csv(path: str | Path) -> Hypergraph:
    """Load a comparison graph from incidence rows.

    Vertex count is the largest object id seen; edges keep the order of
    first appearance of their comparison id.
    """
    path = Path(path)
    _, rows = _open_rows(path, GRAPH_COLUMNS)
    members: dict[str, list[int]] = {}
    first_row: dict[str, int] = {}
    for rownum, row in rows:
        if len(row) < 2:
            raise InputError(f"{path}: row {rownum}: expected 2 columns, got {len(row)}")
        cid = row[0].strip()
        obj = _parse_int(row[1].strip(), path, rownum, "object_id")
        if obj < 1:
            raise InputError(f"{path}: row {rownum}: object_id must be >= 1, got {obj}")
        if cid not in members:
            members[cid] = []
            first_row[cid] = rownum
        if obj in members[cid]:
            raise InputError(
                f"{path}: row {rownum}: object {obj} repeated in comparison {cid!r}"
            )
        members[cid].append(obj)
    n = max(obj for objs in members.values() for obj in objs)
    edges = []
    for cid, objs in members.items():
        if len(objs) < 2:
            raise InputError(
                f"{path}: row {first_row[cid]}: comparison {cid!r} has fewer than 2 objects"
            )
        edges.append(tuple(sorted(objs)))
    return Hypergraph(n=n, edges=tuple(edges))


def write_graph_csv(path: str | Path, graph: Hypergraph) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GRAPH_COLUMNS)
        for cid, edge in enumerate(graph.edges, start=1):
            for obj in edge:
                writer.writerow([cid, obj])


def _comparison_header(d: int) -> list[str]:
    return ["comparison_id", "rank", "object_id"] + [f"x{j}" for j in range(1, d + 1)]


def read_comparisons_csv(path: str | Path) -> Dataset:
    """Load a comparisons file; covariate count is inferred from the header."""
    path = Path(path)
    header, rows = _open_rows(path, ["comparison_id", "rank", "object_id"])
    d = len(header) - 3
    for j, name in enumerate(header[3:], start=1):
        if name != f"x{j}":
            raise InputError(
                f"{path}: row 1: covariate columns must be x1..x{d} in order; column {3 + j} is {name!r}"
            )
    per: dict[str, list[tuple[int, str, int, np.ndarray]]] = {}
    for rownum, row in rows:
        if len(row) != 3 + d:
            raise InputError(f"{path}: row {rownum}: expected {3 + d} columns, got {len(row)}")
        cid = row[0].strip()
        rank_raw = row[1].strip()
        obj = _parse_int(row[2].strip(), path, rownum, "object_id")
        if obj < 1:
            raise InputError(f"{path}: row {rownum}: object_id must be >= 1, got {obj}")
        try:
            x = np.array([float(v) for v in row[3:]], dtype=np.float64)
        except ValueError:
            raise InputError(f"{path}: row {rownum}: covariates must be numeric") from None
        if not np.all(np.isfinite(x)):
            raise InputError(f"{path}: row {rownum}: covariates must be finite")
        per.setdefault(cid, []).append((rownum, rank_raw, obj, x))
    comparisons = []
    n = 0
    for cid, entries in per.items():
        first = entries[0][0]
        m = len(entries)
        if m < 2:
            raise InputError(
                f"{path}: row {first}: comparison {cid!r} has fewer than 2 objects"
            )
        objs = [obj for _, _, obj, _ in entries]
        if len(set(objs)) != m:
            dup = next(o for o in objs if objs.count(o) > 1)
            raise InputError(
                f"{path}: row {first}: object {dup} repeated in comparison {cid!r}"
            )
        n = max(n, max(objs))
        blank = [rank_raw == "" for _, rank_raw, _, _ in entries]
        edge = tuple(sorted(objs))
        obj_to_x = {obj: x for _, _, obj, x in entries}
        covariates = np.stack([obj_to_x[obj] for obj in edge])
        if all(blank):
            outcome = None
        elif any(blank):
            rownum = next(rn for (rn, rank_raw, _, _) in entries if rank_raw == "")
            raise InputError(
                f"{path}: row {rownum}: comparison {cid!r} mixes blank and filled ranks"
            )
        else:
            by_rank: dict[int, int] = {}
            for rownum, rank_raw, obj, _ in entries:
                rank = _parse_int(rank_raw, path, rownum, "rank")
                if rank in by_rank:
                    raise InputError(
                        f"{path}: row {rownum}: duplicate rank {rank} in comparison {cid!r}"
                    )
                by_rank[rank] = obj
            if sorted(by_rank) != list(range(1, m + 1)):
                raise InputError(
                    f"{path}: row {first}: ranks of comparison {cid!r} must be a permutation of 1..{m}"
                )
            outcome = tuple(by_rank[r] for r in range(1, m + 1))
        comparisons.append(Comparison(edge=edge, covariates=covariates, outcome=outcome))
    if not comparisons:
        raise InputError(f"{path}: no comparison rows")
    return Dataset(n=n, d=d, comparisons=tuple(comparisons))


def write_comparisons_csv(path: str | Path, dataset: Dataset) -> None:
    """Write one row per (comparison, object), outcome order when present."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_comparison_header(dataset.d))
        for cid, c in enumerate(dataset.comparisons, start=1):
            if c.outcome is None:
                listing = [("", obj) for obj in c.edge]
            else:
                listing = [(rank, obj) for rank, obj in enumerate(c.outcome, start=1)]
            for rank, obj in listing:
                x = c.covariates[c.edge.index(obj)]
                writer.writerow([cid, rank, obj] + [repr(float(val)) for val in x])


def read_params_json(path: str | Path) -> Params:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict) or "u" not in payload or "v" not in payload:
        raise InputError(f"{path}: expected an object with keys 'u' and 'v'")
    try:
        return Params(
            u=np.array(payload["u"], dtype=np.float64),
            v=np.array(payload["v"], dtype=np.float64),
            meta=dict(payload.get("meta", {})),
        )
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: invalid parameter arrays: {exc}") from exc


def write_params_json(path: str | Path, params: Params) -> None:
    payload = {
        "u": [float(x) for x in params.u],
        "v": [float(x) for x in params.v],
        "meta": params.meta,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_schema(name: str) -> dict:
    """A shipped JSON schema by base name (e.g. 'params', 'manifest')."""
    ref = resources.files("plusdc").joinpath("schemas").joinpath(f"{name}.schema.json")
    try:
        return json.loads(ref.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise InputError(f"no shipped schema named {name!r}") from exc


def file_digest(path: str | Path) -> str:
    """Hex SHA-256 of a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    path: str | Path,
    *,
    command: str,
    argv: Sequence[str],
    seeds: Mapping[str, int] | None,
    inputs: Iterable[str | Path],
    version: str,
    wall_time_s: float,
) -> None:
    """Record how an artifact was produced, next to the artifact."""
    payload = {
        "command": command,
        "argv": list(argv),
        "seeds": dict(seeds) if seeds else {},
        "inputs": {str(p): file_digest(p) for p in inputs},
        "version": version,
        "wall_time_s": round(float(wall_time_s), 3),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
