"""Design matrices and identifiability diagnostics.

Breaking every multiway comparison into oriented pairs anchored at its
smallest vertex yields two matrices: an oriented incidence matrix Q
(source -1, target +1, one column per pair) and a covariate-difference
matrix K (target covariates minus source covariates, one row per pair).
The stacked matrix W = [Q', K] governs identifiability: the model is
identifiable exactly when rank(W) = n + d - 1, the one missing dimension
being the all-ones utility shift.

Two further diagnostics are provided: a sufficient curl test that looks
for d triangles on which the covariate-difference flows have independent
rotational parts, and scale-free conditioning numbers (smallest singular
value of K and the principal-angle cosine between the column spaces of
Q' and K) that control estimation error on random designs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import DomainError
from .model import Comparison, Dataset

RANK_REL_TOL = 1e-10
DENSE_CUTOFF = 5000
MAX_EXHAUSTIVE_TRIANGLES = 5000


@dataclass(frozen=True)
class DesignMatrices:
    """Breaking-level design matrices of a dataset.

    Attributes:
        n: Number of vertices.
        d: Number of covariates.
        q: Oriented incidence matrix, shape (n, n_pairs); -1 at the pair
            source, +1 at the target.
        k: Covariate differences, shape (n_pairs, d); target minus source.
        pairs: (n_pairs, 2) vertex ids (source, target) per pair.
        edge_index: Source comparison index per pair.
    """

    n: int
    d: int
    q: npt.NDArray[np.float64]
    k: npt.NDArray[np.float64]
    pairs: npt.NDArray[np.int64]
    edge_index: npt.NDArray[np.int64]

    @property
    def n_pairs(self) -> int:
        return int(self.pairs.shape[0])

    @property
    def w(self) -> npt.NDArray[np.float64]:
        """Stacked design matrix [Q', K], shape (n_pairs, n + d)."""
        return np.hstack([self.q.T, self.k])


def delta_x(comparison: Comparison) -> npt.NDArray[np.float64]:
    """Covariate differences against the smallest vertex, shape (m-1, d)."""
    x = comparison.covariates
    return x[1:] - x[0]


def assemble(dataset: Dataset) -> DesignMatrices:
    """Build the breaking-level design matrices of a dataset."""
    n_pairs = sum(c.m - 1 for c in dataset.comparisons)
    q = np.zeros((dataset.n, n_pairs))
    k = np.empty((n_pairs, dataset.d))
    pairs = np.empty((n_pairs, 2), dtype=np.int64)
    edge_index = np.empty(n_pairs, dtype=np.int64)
    r = 0
    for i, c in enumerate(dataset.comparisons):
        dx = delta_x(c)
        for t in range(1, c.m):
            q[c.edge[0] - 1, r] = -1.0
            q[c.edge[t] - 1, r] = 1.0
            k[r] = dx[t - 1]
            pairs[r] = (c.edge[0], c.edge[t])
            edge_index[r] = i
            r += 1
    return DesignMatrices(n=dataset.n, d=dataset.d, q=q, k=k, pairs=pairs, edge_index=edge_index)


# ---------------------------------------------------------------------------
# rank-based identifiability

@dataclass(frozen=True)
class IdentifiabilityResult:
    """Outcome of the rank test on W = [Q', K].

    `witness` is populated on failure with a unit parameter direction in
    the kernel of W orthogonal to the trivial all-ones utility shift:
    a direction the data cannot distinguish from zero.
    """

    identifiable: bool
    rank: int
    required_rank: int
    witness: npt.NDArray[np.float64] | None
    threshold: float


def identifiability_check(
    dm: DesignMatrices, *, dense_cutoff: int = DENSE_CUTOFF
) -> IdentifiabilityResult:
    """Decide identifiability from rank(W) = n + d - 1.

    Uses a full SVD with relative threshold RANK_REL_TOL * max(shape)
    below `dense_cutoff` total parameters and a sparse iterative solve
    above it (smallest singular value of W restricted to the complement
    of the known kernel direction).
    """
    n, d = dm.n, dm.d
    required = n + d - 1
    if dm.n_pairs == 0:
        witness = None if required == 0 else _kernel_witness_from_basis(np.eye(n + d), n)
        return IdentifiabilityResult(
            identifiable=required == 0, rank=0, required_rank=required, witness=witness, threshold=0.0
        )
    if n + d <= dense_cutoff:
        w = dm.w
        sig = scipy.linalg.svdvals(w)
        thresh = RANK_REL_TOL * max(w.shape) * sig[0]
        rank = int(np.count_nonzero(sig > thresh))
        if rank == required:
            return IdentifiabilityResult(True, rank, required, None, float(thresh))
        _, _, vt = scipy.linalg.svd(w, full_matrices=True)
        kernel = vt[rank:].T
        witness = _kernel_witness_from_basis(kernel, n)
        return IdentifiabilityResult(False, rank, required, witness, float(thresh))
    return _identifiability_iterative(dm)


def _kernel_witness_from_basis(kernel: npt.NDArray, n: int) -> npt.NDArray | None:
    """Unit kernel direction orthogonal to the all-ones utility shift."""
    a = np.zeros(kernel.shape[0])
    a[:n] = 1.0 / np.sqrt(n)
    proj = kernel - np.outer(a, a @ kernel)
    norms = np.linalg.norm(proj, axis=0)
    if norms.size == 0 or norms.max() < 1e-8:
        return None
    vec = proj[:, int(norms.argmax())]
    return vec / np.linalg.norm(vec)


def _identifiability_iterative(dm: DesignMatrices) -> IdentifiabilityResult:
    """Sparse path: smallest singular value of W on the complement of 1."""
    n, d = dm.n, dm.d
    required = n + d - 1
    w = scipy.sparse.hstack(
        [scipy.sparse.csr_matrix(dm.q.T), scipy.sparse.csr_matrix(dm.k)]
    ).tocsr()
    sig_max = float(
        scipy.sparse.linalg.svds(w, k=1, which="LM", return_singular_vectors=False)[0]
    )
    thresh = RANK_REL_TOL * max(w.shape) * sig_max
    # Householder map sending e_1 to the known kernel direction (1, 0)/sqrt(n);
    # columns 2.. span its complement.
    a = np.zeros(n + d)
    a[:n] = 1.0 / np.sqrt(n)
    h_vec = a.copy()
    h_vec[0] -= 1.0
    h_norm = np.linalg.norm(h_vec)
    if h_norm > 0:
        h_vec /= h_norm

    def reflect(x: npt.NDArray) -> npt.NDArray:
        return x - 2.0 * h_vec * (h_vec @ x)

    def matvec(y: npt.NDArray) -> npt.NDArray:
        full = np.concatenate([[0.0], np.ravel(y)])
        return w @ reflect(full)

    def rmatvec(r: npt.NDArray) -> npt.NDArray:
        return reflect(w.T @ np.ravel(r))[1:]

    op = scipy.sparse.linalg.LinearOperator(
        shape=(w.shape[0], n + d - 1), matvec=matvec, rmatvec=rmatvec
    )
    k_small = min(2, n + d - 2)
    _, sig_small, vt_small = scipy.sparse.linalg.svds(op, k=k_small, which="SM")
    smallest = float(sig_small.min())
    if smallest > thresh:
        return IdentifiabilityResult(True, required, required, None, float(thresh))
    y = vt_small[int(np.argmin(sig_small))]
    witness = reflect(np.concatenate([[0.0], y]))
    witness /= np.linalg.norm(witness)
    # Rank is required minus the number of extra near-null directions found.
    deficiency = int(np.count_nonzero(sig_small <= thresh))
    return IdentifiabilityResult(False, required - deficiency, required, witness, float(thresh))


# ---------------------------------------------------------------------------
# curl-based sufficient check

@dataclass(frozen=True)
class Triangle:
    """Three vertices pairwise adjacent in the broken pair graph."""

    a: int
    b: int
    c: int

    def __iter__(self):
        return iter((self.a, self.b, self.c))


@dataclass(frozen=True)
class CurlCheck:
    """Outcome of the triangle/curl sufficient identifiability test.

    passes=True certifies identifiability (given connectivity).  When
    the triangle budget forces a greedy scan and no certificate is
    found, `inconclusive` is True and passes is False: the test cannot
    rule identifiability out.
    """

    passes: bool
    inconclusive: bool
    connected: bool
    n_triangles: int
    triangles: tuple[Triangle, ...]
    det: float | None
    reason: str


def _pair_rows(dm: DesignMatrices) -> dict[tuple[int, int], int]:
    """First K row per unordered pair; duplicates deduplicated."""
    rows: dict[tuple[int, int], int] = {}
    for r, (a, b) in enumerate(dm.pairs.tolist()):
        key = (a, b) if a < b else (b, a)
        rows.setdefault(key, r)
    return rows


def _pair_flow(dm: DesignMatrices, rows: dict, a: int, b: int) -> npt.NDArray:
    """Alternating flow value f(a, b) from the deduplicated K rows."""
    if (a, b) in rows:
        return dm.k[rows[(a, b)]]
    return -dm.k[rows[(b, a)]]


def list_triangles(dm: DesignMatrices) -> list[Triangle]:
    """Triangles of the simple skeleton of the broken pair graph."""
    rows = _pair_rows(dm)
    adj: dict[int, set[int]] = {}
    for a, b in rows:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    out = []
    for a, b in sorted(rows):
        for c in sorted(adj[a] & adj[b]):
            if c > b:
                out.append(Triangle(a, b, c))
    return out


def curl_matrix(dm: DesignMatrices, triangles: list[Triangle] | None = None) -> npt.NDArray:
    """Curl of every covariate-difference flow on each triangle.

    Row t holds f(a,b) + f(b,c) - f(a,c) for triangle t = (a, b, c): the
    net circulation of each K column around the triangle.
    """
    if triangles is None:
        triangles = list_triangles(dm)
    rows = _pair_rows(dm)
    out = np.empty((len(triangles), dm.d))
    for t, tri in enumerate(triangles):
        a, b, c = tri
        out[t] = (
            _pair_flow(dm, rows, a, b)
            + _pair_flow(dm, rows, b, c)
            - _pair_flow(dm, rows, a, c)
        )
    return out


def _is_connected_pairs(dm: DesignMatrices) -> bool:
    parent = list(range(dm.n + 1))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in dm.pairs.tolist():
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra
    return len({find(v) for v in range(1, dm.n + 1)}) == 1


def curl_sufficient_check(
    dm: DesignMatrices, *, max_exhaustive: int = MAX_EXHAUSTIVE_TRIANGLES
) -> CurlCheck:
    """Certify identifiability from d independently curling triangles.

    Looks for d triangles whose d x d curl matrix is nonsingular; along
    with connectivity this is sufficient (not necessary) for the rank
    condition.  Up to `max_exhaustive` triangles the full curl matrix is
    used (rank + pivoted selection); beyond it a greedy rank-building
    scan runs and a miss is reported as inconclusive.
    """
    connected = _is_connected_pairs(dm)
    tris = list_triangles(dm)
    if dm.d == 0:
        return CurlCheck(
            passes=connected,
            inconclusive=False,
            connected=connected,
            n_triangles=len(tris),
            triangles=(),
            det=None,
            reason="no covariates; certificate reduces to connectivity",
        )
    if not tris:
        return CurlCheck(False, False, connected, 0, (), None, "no triangles in the pair graph")
    if len(tris) <= max_exhaustive:
        cm = curl_matrix(dm, tris)
        sig = scipy.linalg.svdvals(cm)
        thresh = RANK_REL_TOL * max(cm.shape) * (sig[0] if sig.size else 0.0)
        rank = int(np.count_nonzero(sig > thresh))
        if rank < dm.d or not connected:
            reason = "disconnected pair graph" if not connected else (
                f"curl rank {rank} < d = {dm.d}"
            )
            return CurlCheck(False, False, connected, len(tris), (), None, reason)
        _, _, piv = scipy.linalg.qr(cm.T, pivoting=True)
        chosen = sorted(int(p) for p in piv[: dm.d])
        minor = cm[chosen]
        return CurlCheck(
            passes=True,
            inconclusive=False,
            connected=connected,
            n_triangles=len(tris),
            triangles=tuple(tris[i] for i in chosen),
            det=float(np.linalg.det(minor)),
            reason="",
        )
    # Greedy regime: grow a row set that increases numerical rank.
    chosen_idx: list[int] = []
    basis = np.empty((0, dm.d))
    for i, tri in enumerate(tris):
        row = curl_matrix(dm, [tri])
        cand = np.vstack([basis, row])
        sig = scipy.linalg.svdvals(cand)
        thresh = RANK_REL_TOL * max(cand.shape) * sig[0]
        if np.count_nonzero(sig > thresh) == cand.shape[0]:
            basis = cand
            chosen_idx.append(i)
            if len(chosen_idx) == dm.d:
                break
    if len(chosen_idx) == dm.d and connected:
        return CurlCheck(
            passes=True,
            inconclusive=False,
            connected=connected,
            n_triangles=len(tris),
            triangles=tuple(tris[i] for i in chosen_idx),
            det=float(np.linalg.det(basis)),
            reason="",
        )
    if not connected:
        return CurlCheck(False, False, connected, len(tris), (), None, "disconnected pair graph")
    return CurlCheck(
        passes=False,
        inconclusive=True,
        connected=connected,
        n_triangles=len(tris),
        triangles=(),
        det=None,
        reason="greedy scan found no certificate; exhaustive budget exceeded",
    )


# ---------------------------------------------------------------------------
# conditioning diagnostics

def consistency_diagnostics(dm: DesignMatrices) -> dict:
    """Scale-free conditioning numbers of the breaking-level design.

    Returns:
        dict with `sigma_min_K` = smallest singular value of K divided by
        sqrt(n_pairs), and `incoherence_cos` = largest principal-angle
        cosine between the column spaces of Q' and K.  Both are 0 when
        there are no covariates or no pairs.
    """
    if dm.d == 0 or dm.n_pairs == 0:
        return {"sigma_min_K": 0.0, "incoherence_cos": 0.0}
    sig_k = scipy.linalg.svdvals(dm.k)
    sigma_min = float(sig_k.min() / np.sqrt(dm.n_pairs))
    u_q = scipy.linalg.orth(dm.q.T)
    u_k = scipy.linalg.orth(dm.k)
    if u_q.size == 0 or u_k.size == 0:
        return {"sigma_min_K": sigma_min, "incoherence_cos": 0.0}
    cos = float(scipy.linalg.svdvals(u_q.T @ u_k)[0])
    return {"sigma_min_K": sigma_min, "incoherence_cos": min(cos, 1.0)}


# ---------------------------------------------------------------------------
# static-covariate equivalence

@dataclass(frozen=True)
class CareResult:
    """Covariate-adjusted re-estimation from a no-covariate fit.

    With one static covariate vector per object (matrix z), the maximum
    likelihood covariate weights and residual utilities are an exact
    linear readout of the no-covariate utilities u_tilde.
    """

    u_hat: npt.NDArray[np.float64]
    v_hat: npt.NDArray[np.float64]


def care_equivalence(z: npt.NDArray, u_tilde: npt.NDArray) -> CareResult:
    """Split centered no-covariate utilities into covariate and residual parts.

    Args:
        z: Static covariates, one row per object, shape (n, d).
        u_tilde: Centered no-covariate maximum likelihood utilities.

    Returns:
        CareResult with v_hat = (z'z - z'11'z/n)^{-1} z' u_tilde and
        u_hat = u_tilde - (I - 11'/n) z v_hat; u_hat is centered and
        z-orthogonal.

    Raises:
        DomainError: If z is rank deficient, the ones vector lies in its
            column space, or u_tilde is not centered.
    """
    z = np.asarray(z, dtype=np.float64)
    u_tilde = np.asarray(u_tilde, dtype=np.float64).reshape(-1)
    n, d = z.shape
    if u_tilde.size != n:
        raise ValueError(f"u_tilde has length {u_tilde.size}, expected {n}")
    scale = max(1.0, float(np.abs(u_tilde).max()))
    if abs(u_tilde.sum()) > 1e-8 * n * scale:
        raise DomainError("u_tilde is not centered: failed hypothesis 1'u = 0")
    if np.linalg.matrix_rank(z) < d:
        raise DomainError("z is rank deficient: failed hypothesis rank(z) = d")
    ones = np.ones((n, 1))
    if np.linalg.matrix_rank(np.hstack([z, ones])) == d:
        raise DomainError("ones vector lies in range(z): failed hypothesis 1 not in range(z)")
    centered_z = z - ones @ (ones.T @ z) / n
    gram = z.T @ centered_z
    v_hat = np.linalg.solve(gram, z.T @ u_tilde)
    u_hat = u_tilde - centered_z @ v_hat
    return CareResult(u_hat=u_hat, v_hat=v_hat)
