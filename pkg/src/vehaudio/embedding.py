"""
Symmetric normalized graph Laplacian, its smallest eigenpairs, and eigengap
based choice of dimension.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from .errors import EigenError, GraphError
from .graph import SimilarityGraph

DEFAULT_EIGS = 5
DENSE_LIMIT = 2000
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class Embedding:
    eigenvalues: np.ndarray
    vectors: np.ndarray  # n x k, unit-norm columns

    @property
    def k(self) -> int:
        return self.vectors.shape[1]

    def coordinates(self, drop_trivial: bool = False, normalize_rows: bool = False) -> np.ndarray:
        """
        Rows used for clustering.  The first (near-null) eigenvector is kept
        unless ``drop_trivial``; rows are rescaled to unit length only when
        ``normalize_rows`` is set.
        """
        V = self.vectors[:, 1:] if drop_trivial else self.vectors
        if normalize_rows:
            norms = np.linalg.norm(V, axis=1, keepdims=True)
            V = V / np.where(norms > 0, norms, 1.0)
        return V

    def save_csv(self, path: str | Path, window_times_s: np.ndarray) -> Path:
        """Header ``time_s,v1..vk``, then a ``lambda`` row, then one row per window."""
        path = Path(path)
        lines = [",".join(["time_s"] + [f"v{j + 1}" for j in range(self.k)])]
        lines.append(",".join(["lambda"] + [f"{v:.17g}" for v in self.eigenvalues]))
        for t, row in zip(window_times_s, self.vectors):
            lines.append(",".join([f"{t:.17g}"] + [f"{v:.17g}" for v in row]))
        path.write_text("\n".join(lines) + "\n")
        return path

    @classmethod
    def load_csv(cls, path: str | Path) -> tuple["Embedding", np.ndarray]:
        lines = Path(path).read_text().splitlines()
        if len(lines) < 2 or not lines[1].startswith("lambda,"):
            raise ValueError(f"{path}: missing lambda row")
        evals = np.array([float(v) for v in lines[1].split(",")[1:]])
        body = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]]).reshape(-1, evals.size + 1)
        return cls(evals, body[:, 1:]), body[:, 0]


def build_sngl(graph: SimilarityGraph | np.ndarray, degrees: np.ndarray | None = None) -> np.ndarray:
    """
    Dense ``I - D^{-1/2} S D^{-1/2}``.

    Accepts a :class:`SimilarityGraph` or a raw (dense or sparse) similarity
    matrix, in which case degrees are its row sums.
    """
    if isinstance(graph, SimilarityGraph):
        S, degrees = graph.S, graph.degrees
    else:
        S = graph
    S = S.toarray() if sp.issparse(S) else np.asarray(S, dtype=np.float64)
    if degrees is None:
        degrees = S.sum(axis=1)
    degrees = np.asarray(degrees, dtype=np.float64)
    zero = np.flatnonzero(~(degrees > 0))
    if zero.size:
        raise GraphError(f"vertex {zero[0]} has zero degree")
    # d_i * d_j commutes exactly, so L is bit-symmetric
    L = -S / np.sqrt(np.outer(degrees, degrees))
    L[np.diag_indices_from(L)] += 1.0
    return L


def _fix_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so the entry of largest magnitude is positive (first on ties)."""
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def smallest_eigenpairs(L: np.ndarray, k_max: int = DEFAULT_EIGS, tol: float = RESIDUAL_TOL) -> Embedding:
    """
    The ``k_max`` algebraically smallest eigenpairs of a symmetric matrix.

    Dense LAPACK for n <= 2000, shift-invert Lanczos above.  Every returned
    pair is checked against ``||L v - lambda v|| <= tol``.

    Raises
    ------
    EigenError
        Iterative solver failed to converge or a residual exceeds ``tol``.
    """
    n = L.shape[0]
    if not 1 <= k_max <= n:
        raise EigenError(f"requested {k_max} eigenpairs of a {n}x{n} matrix")
    if n <= DENSE_LIMIT:
        dense = L.toarray() if sp.issparse(L) else np.asarray(L, dtype=np.float64)
        evals, V = scipy.linalg.eigh(dense, subset_by_index=[0, k_max - 1], driver="evr")
        apply = dense
    else:
        try:
            evals, V = scipy.sparse.linalg.eigsh(
                sp.csr_matrix(L), k=k_max, sigma=-1e-3, which="LM", v0=np.ones(n)
            )
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise EigenError(f"Lanczos did not converge ({len(exc.eigenvalues)} of {k_max} pairs)") from exc
        order = np.argsort(evals)
        evals, V = evals[order], V[:, order]
        apply = L
    V = V / np.linalg.norm(V, axis=0)
    V = _fix_signs(V)
    resid = np.linalg.norm(apply @ V - V * evals, axis=0)
    worst = float(resid.max())
    if worst > tol:
        raise EigenError(f"eigenpair residual {worst:.3g} exceeds {tol:.1g}")
    return Embedding(np.asarray(evals, dtype=np.float64), V)


def eigengap_select(eigenvalues: np.ndarray, k_min: int = 2, k_max: int | None = None) -> int:
    """
    Dimension k in ``[k_min, k_max]`` maximizing ``lambda_{k+1} - lambda_k``
    (1-based).  Ties go to the smaller k.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if k_max is None:
        k_max = lam.size - 1
    if k_min < 2:
        raise ValueError(f"k_min must be >= 2, got {k_min}")
    if k_max > lam.size - 1:
        raise ValueError(f"k_max={k_max} needs at least {k_max + 1} eigenvalues, got {lam.size}")
    if k_min > k_max:
        raise ValueError(f"empty range [{k_min}, {k_max}]")
    gaps = np.diff(lam)  # gaps[k-1] = lambda_{k+1} - lambda_k
    return k_min + int(np.argmax(gaps[k_min - 1 : k_max]))


def spectral_embedding(graph: SimilarityGraph, k_max: int = DEFAULT_EIGS) -> Embedding:
    return smallest_eigenpairs(build_sngl(graph), k_max)
