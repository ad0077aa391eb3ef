"""Ranking probability model with per-comparison covariates.

An object j competing in comparison e gets the score

    s_j = u_j + x_{e,j}' v,

where u_j is its baseline utility and x_{e,j} are covariates specific to
that object in that comparison.  A full ranking is drawn by repeatedly
picking the next-best object with probability proportional to exp(score)
among those still unranked.  With no covariates this is the classical
Plackett-Luce model; on pairs it reduces to Bradley-Terry.

All probability computations run in log space with suffix log-sum-exp
accumulated in one reverse sweep per comparison, so likelihoods stay
finite for parameter magnitudes up to about 700.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import numpy.typing as npt

from .errors import DomainError
from .hypergraph import Hypergraph


@dataclass(frozen=True, eq=False)
class Comparison:
    """One multiway comparison with covariates and an optional outcome.

    Attributes:
        edge: Participating vertex ids as a strictly increasing tuple.
        covariates: Array of shape (m, d); row j holds the covariates of
            edge[j] in this comparison.  d may be 0.
        outcome: Observed ranking as a tuple of vertex ids, best first;
            must be a permutation of `edge`.  None when unobserved.
    """

    edge: tuple[int, ...]
    covariates: npt.NDArray[np.float64]
    outcome: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        edge = tuple(int(v) for v in self.edge)
        object.__setattr__(self, "edge", edge)
        if len(edge) < 2:
            raise ValueError(f"comparison needs at least two objects, got {edge}")
        if any(a >= b for a, b in zip(edge, edge[1:])):
            raise ValueError(f"edge {edge} is not strictly increasing")
        x = np.asarray(self.covariates, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != len(edge):
            raise ValueError(
                f"covariates shape {x.shape} does not match {len(edge)} objects"
            )
        object.__setattr__(self, "covariates", x)
        if self.outcome is not None:
            outcome = tuple(int(v) for v in self.outcome)
            if sorted(outcome) != list(edge):
                raise ValueError(f"outcome {outcome} is not a permutation of edge {edge}")
            object.__setattr__(self, "outcome", outcome)

    @property
    def m(self) -> int:
        return len(self.edge)

    @property
    def d(self) -> int:
        return int(self.covariates.shape[1])


@dataclass(frozen=True, eq=False)
class Params:
    """Model parameters: per-object utilities and covariate weights."""

    u: npt.NDArray[np.float64]
    v: npt.NDArray[np.float64]
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=np.float64).reshape(-1)
        v = np.asarray(self.v, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(u)) or not np.all(np.isfinite(v)):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def zeros(cls, n: int, d: int) -> "Params":
        return cls(u=np.zeros(n), v=np.zeros(d))

    @property
    def n(self) -> int:
        return int(self.u.size)

    @property
    def d(self) -> int:
        return int(self.v.size)

    @property
    def theta(self) -> npt.NDArray[np.float64]:
        """Stacked parameter vector (u, v)."""
        return np.concatenate([self.u, self.v])


@dataclass(frozen=True, eq=False)
class Dataset:
    """A collection of comparisons over a common vertex set."""

    n: int
    d: int
    comparisons: tuple[Comparison, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "comparisons", tuple(self.comparisons))
        for i, c in enumerate(self.comparisons):
            if c.edge[-1] > self.n or c.edge[0] < 1:
                raise ValueError(f"comparison {i} has vertex ids outside 1..{self.n}")
            if c.d != self.d:
                raise ValueError(
                    f"comparison {i} has {c.d} covariates, dataset declares {self.d}"
                )

    @property
    def n_comparisons(self) -> int:
        return len(self.comparisons)

    def graph(self) -> Hypergraph:
        """The comparison hypergraph underlying this dataset."""
        return Hypergraph(n=self.n, edges=tuple(c.edge for c in self.comparisons))

    def degrees(self) -> npt.NDArray[np.int64]:
        deg = np.zeros(self.n, dtype=np.int64)
        for c in self.comparisons:
            for vtx in c.edge:
                deg[vtx - 1] += 1
        return deg


# ---------------------------------------------------------------------------
# packed evaluation kernels

@dataclass(frozen=True)
class _Group:
    """Comparisons of equal size, outcome-ordered for vector evaluation."""

    pos: npt.NDArray[np.int64]  # (G, m) 0-based vertex index at each rank
    x: npt.NDArray[np.float64]  # (G, m, d) covariates at each rank
    mask: npt.NDArray[np.float64]  # (m, m): 1 where j <= t, else 0


def _pack(dataset: Dataset) -> list[_Group]:
    """Group outcome-bearing comparisons by size; cached on the dataset."""
    hit = dataset.__dict__.get("_packed")
    if hit is not None:
        return hit
    by_m: dict[int, list[Comparison]] = {}
    for i, c in enumerate(dataset.comparisons):
        if c.outcome is None:
            raise DomainError(f"comparison {i} has no outcome; likelihood is undefined")
        by_m.setdefault(c.m, []).append(c)
    groups = []
    for m in sorted(by_m):
        cs = by_m[m]
        pos = np.empty((len(cs), m), dtype=np.int64)
        x = np.empty((len(cs), m, dataset.d), dtype=np.float64)
        for g, c in enumerate(cs):
            order = [c.edge.index(v) for v in c.outcome]
            pos[g] = np.array(c.outcome, dtype=np.int64) - 1
            x[g] = c.covariates[order]
        mask = np.tril(np.ones((m, m))).T  # mask[j, t] = 1 iff j <= t
        groups.append(_Group(pos=pos, x=x, mask=mask))
    object.__setattr__(dataset, "_packed", groups)
    return groups


def _scores(group: _Group, u: npt.NDArray, v: npt.NDArray) -> npt.NDArray:
    s = u[group.pos]
    if v.size:
        s = s + group.x @ v
    return s


def _suffix_logsumexp(s: npt.NDArray) -> npt.NDArray:
    """L[:, j] = log sum_{t >= j} exp(s[:, t]) by one reverse sweep."""
    m = s.shape[1]
    out = np.empty_like(s)
    out[:, -1] = s[:, -1]
    for j in range(m - 2, -1, -1):
        out[:, j] = np.logaddexp(s[:, j], out[:, j + 1])
    return out


def _suffix_weights(group: _Group, s: npt.NDArray, lse: npt.NDArray) -> npt.NDArray:
    """W[:, j, t] = exp(s_t - L_j) for j <= t, else 0.

    Every kept exponent satisfies s_t <= L_t <= L_j, so no overflow is
    possible regardless of the score scale.
    """
    diff = s[:, None, :] - lse[:, :, None]
    return np.exp(np.where(group.mask[None, :, :] == 1.0, diff, -np.inf))


def log_likelihood(params: Params, dataset: Dataset, *, normalized: bool = False) -> float:
    """Total (or per-comparison) log-probability of all observed outcomes."""
    _check_dims(params, dataset)
    if normalized and dataset.n_comparisons == 0:
        raise DomainError("normalized log-likelihood is undefined on an empty dataset")
    total = 0.0
    for group in _pack(dataset):
        s = _scores(group, params.u, params.v)
        lse = _suffix_logsumexp(s)
        total += float((s - lse).sum())
    if normalized:
        return total / dataset.n_comparisons
    return total


def gradient(params: Params, dataset: Dataset) -> npt.NDArray[np.float64]:
    """Gradient of the total log-likelihood with respect to (u, v)."""
    _check_dims(params, dataset)
    n, d = dataset.n, dataset.d
    gu = np.zeros(n)
    gv = np.zeros(d)
    for group in _pack(dataset):
        s = _scores(group, params.u, params.v)
        lse = _suffix_logsumexp(s)
        w = _suffix_weights(group, s, lse)
        coef = 1.0 - w.sum(axis=1)  # (G, m): per-rank score sensitivity
        np.add.at(gu, group.pos, coef)
        if d:
            gv += np.einsum("gm,gmd->d", coef, group.x)
    return np.concatenate([gu, gv])


def hessian(params: Params, dataset: Dataset) -> npt.NDArray[np.float64]:
    """Hessian of the total log-likelihood; negative semidefinite."""
    _check_dims(params, dataset)
    n, d = dataset.n, dataset.d
    h = np.zeros((n + d, n + d))
    for group in _pack(dataset):
        s = _scores(group, params.u, params.v)
        lse = _suffix_logsumexp(s)
        w = _suffix_weights(group, s, lse)
        hs = _score_space_hessian(w)
        pos = group.pos
        np.add.at(h, (pos[:, :, None], pos[:, None, :]), hs)
        if d:
            cross = np.einsum("gab,gbd->gad", hs, group.x)
            np.add.at(h[:n, n:], pos, cross)
            h[n:, n:] += np.einsum("gad,gab,gbe->de", group.x, hs, group.x)
    h[n:, :n] = h[:n, n:].T
    return h


def _score_space_hessian(w: npt.NDArray) -> npt.NDArray:
    """Per-comparison Hessian in score coordinates: W'W - diag(colsums)."""
    colsum = w.sum(axis=1)
    hs = np.einsum("gjt,gjs->gts", w, w)
    idx = np.arange(w.shape[2])
    hs[:, idx, idx] -= colsum
    return hs


def hessian_v(params: Params, dataset: Dataset) -> npt.NDArray[np.float64]:
    """Covariate-weight block of the Hessian, shape (d, d)."""
    _check_dims(params, dataset)
    d = dataset.d
    h = np.zeros((d, d))
    for group in _pack(dataset):
        s = _scores(group, params.u, params.v)
        lse = _suffix_logsumexp(s)
        w = _suffix_weights(group, s, lse)
        hs = _score_space_hessian(w)
        h += np.einsum("gad,gab,gbe->de", group.x, hs, group.x)
    return h


def _check_dims(params: Params, dataset: Dataset) -> None:
    if params.n != dataset.n:
        raise ValueError(f"params have {params.n} utilities, dataset has n={dataset.n}")
    if params.d != dataset.d:
        raise ValueError(f"params have {params.d} weights, dataset has d={dataset.d}")


# ---------------------------------------------------------------------------
# per-comparison probabilities

def score(params: Params, comparison: Comparison) -> npt.NDArray[np.float64]:
    """Scores of the comparison's objects, aligned with `comparison.edge`."""
    if comparison.d != params.d:
        raise ValueError(f"comparison has d={comparison.d}, params have d={params.d}")
    idx = np.array(comparison.edge, dtype=np.int64) - 1
    if idx[-1] >= params.n:
        raise ValueError(f"edge {comparison.edge} outside params with n={params.n}")
    s = params.u[idx]
    if params.d:
        s = s + comparison.covariates @ params.v
    return s


def ranking_log_prob(params: Params, comparison: Comparison, ranking: Sequence[int]) -> float:
    """Log-probability that the comparison resolves exactly to `ranking`."""
    ranking = tuple(int(v) for v in ranking)
    if sorted(ranking) != list(comparison.edge):
        raise ValueError(f"ranking {ranking} is not a permutation of {comparison.edge}")
    s_edge = score(params, comparison)
    order = [comparison.edge.index(v) for v in ranking]
    s = s_edge[order]
    total = 0.0
    lse = -np.inf
    for j in range(len(s) - 1, -1, -1):
        lse = np.logaddexp(s[j], lse)
        total += s[j] - lse
    return float(total)


def outcome_prob(params: Params, comparison: Comparison, *, log: bool = False) -> float:
    """Probability of the comparison's observed outcome."""
    if comparison.outcome is None:
        raise DomainError("comparison has no outcome")
    lp = ranking_log_prob(params, comparison, comparison.outcome)
    return lp if log else float(np.exp(lp))


def top_k_prob(params: Params, comparison: Comparison, k: int, *, log: bool = False) -> float:
    """Probability that the first k of the outcome occupy the top k in order.

    Equals the first k factors of the sequential-choice product, which
    marginalizes the ordering of the remaining objects.
    """
    if comparison.outcome is None:
        raise DomainError("comparison has no outcome")
    m = comparison.m
    if not 1 <= k <= m:
        raise ValueError(f"k={k} outside 1..{m}")
    s_edge = score(params, comparison)
    order = [comparison.edge.index(v) for v in comparison.outcome]
    s = s_edge[order]
    lse = np.empty(m)
    lse[-1] = s[-1]
    for j in range(m - 2, -1, -1):
        lse[j] = np.logaddexp(s[j], lse[j + 1])
    lp = float((s[:k] - lse[:k]).sum())
    return lp if log else float(np.exp(lp))


def sample_outcome(
    params: Params, comparison: Comparison, rng: np.random.Generator
) -> Comparison:
    """Draw a ranking by sequential choice proportional to exp(score)."""
    s = score(params, comparison)
    remaining = list(range(comparison.m))
    ranking: list[int] = []
    for _ in range(comparison.m):
        sub = s[remaining]
        p = np.exp(sub - sub.max())
        p /= p.sum()
        pick = int(rng.choice(len(remaining), p=p))
        ranking.append(comparison.edge[remaining[pick]])
        remaining.pop(pick)
    return Comparison(
        edge=comparison.edge, covariates=comparison.covariates, outcome=tuple(ranking)
    )


def make_dataset(
    n: int,
    d: int,
    items: Iterable[tuple[Sequence[int], npt.NDArray, Sequence[int] | None]],
) -> Dataset:
    """Convenience constructor from (edge, covariates, outcome) triples."""
    comps = [
        Comparison(edge=tuple(e), covariates=np.asarray(x, dtype=np.float64), outcome=None if o is None else tuple(o))
        for e, x, o in items
    ]
    return Dataset(n=n, d=d, comparisons=tuple(comps))
