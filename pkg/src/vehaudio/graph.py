"""
Cosine distances and the sparse adaptive-Gaussian similarity graph.

Each point i gets a bandwidth sigma_i equal to the distance to its N-th
nearest other point; only those N neighbors receive a similarity
exp(-d_ij**2 / sigma_i**2).  The row-wise result is symmetrized by taking the
elementwise maximum with its transpose.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import GraphError

DEFAULT_NEIGHBORS = 15


@dataclass(frozen=True)
class SimilarityGraph:
    S: sp.csr_matrix
    n_neighbors: int
    sigma: np.ndarray
    degrees: np.ndarray

    @property
    def n(self) -> int:
        return self.S.shape[0]

    def dump(self, path: str | Path) -> Path:
        """Write the nonzeros as ``i j s_ij`` lines sorted by (i, j)."""
        coo = self.S.tocoo()
        order = np.lexsort((coo.col, coo.row))
        path = Path(path)
        with open(path, "w") as fh:
            for i, j, s in zip(coo.row[order], coo.col[order], coo.data[order]):
                fh.write(f"{i} {j} {float(s)!r}\n")
        return path


def cosine_distances(X: np.ndarray) -> np.ndarray:
    """
    Pairwise ``1 - x_i.x_j / (|x_i| |x_j|)``.

    The result is exactly symmetric (upper triangle mirrored), has a zero
    diagonal, and is clipped to [0, 2] to absorb rounding.

    Raises
    ------
    GraphError
        If any row has zero norm; the message names the first such row.
    """
    X = np.asarray(getattr(X, "X", X), dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    bad = np.flatnonzero(~(norms > 0))
    if bad.size:
        raise GraphError(f"window {bad[0]} has a zero-norm feature vector")
    U = X / norms[:, None]
    D = np.clip(1.0 - U @ U.T, 0.0, 2.0)
    D = np.triu(D, 1)
    return D + D.T


def nearest_neighbors(D: np.ndarray, n_neighbors: int) -> np.ndarray:
    """
    Indices of each row's ``n_neighbors`` nearest other points, nearest first.
    Equal distances are ordered by index.
    """
    n = D.shape[0]
    # push self to the end; stable sort breaks ties by lower index
    masked = D.copy()
    masked[np.arange(n), np.arange(n)] = np.inf
    return np.argsort(masked, axis=1, kind="stable")[:, :n_neighbors]


def adaptive_similarities(D: np.ndarray, n_neighbors: int = DEFAULT_NEIGHBORS) -> SimilarityGraph:
    """
    Sparse adaptive-Gaussian similarity graph from a symmetric distance matrix.

    Parameters
    ----------
    D : (n, n) array
        Symmetric, zero-diagonal distances.  Cosine distances in production;
        any metric works.
    n_neighbors : int
        Neighbor count N, with 1 <= N < n.

    Raises
    ------
    GraphError
        If some sigma_i is zero (N or more exact duplicates of point i) or a
        vertex ends up with zero degree.
    """
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if D.shape != (n, n):
        raise GraphError(f"distance matrix must be square, got {D.shape}")
    N = int(n_neighbors)
    if not 1 <= N < n:
        raise GraphError(f"neighbor count {N} must satisfy 1 <= N < n = {n}")

    nbrs = nearest_neighbors(D, N)
    rows = np.repeat(np.arange(n), N)
    d = D[rows, nbrs.ravel()].reshape(n, N)
    sigma = d[:, -1].copy()
    zero = np.flatnonzero(~(sigma > 0))
    if zero.size:
        raise GraphError(
            f"point {zero[0]} has zero bandwidth (at least {N} exact duplicates)"
        )
    vals = np.exp(-(d**2) / sigma[:, None] ** 2)
    S = sp.csr_matrix((vals.ravel(), (rows, nbrs.ravel())), shape=(n, n))
    S = S.maximum(S.T).tocsr()
    S.sort_indices()
    degrees = np.asarray(S.sum(axis=1)).ravel()
    isolated = np.flatnonzero(~(degrees > 0))
    if isolated.size:
        raise GraphError(f"vertex {isolated[0]} is isolated (zero degree)")
    return SimilarityGraph(S=S, n_neighbors=N, sigma=sigma, degrees=degrees)


def build_graph(X: np.ndarray, n_neighbors: int = DEFAULT_NEIGHBORS) -> SimilarityGraph:
    return adaptive_similarities(cosine_distances(X), n_neighbors)
