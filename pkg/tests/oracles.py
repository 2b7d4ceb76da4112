"""
Slow, independent reference implementations.  None of these call into the
package; they exist only to check it.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def naive_dft(x: np.ndarray, n_coeffs: int | None = None) -> np.ndarray:
    """Direct O(w^2) DFT sum, X_k = sum_t x_t exp(-2 pi i k t / w)."""
    x = np.asarray(x, dtype=np.float64)
    w = x.size
    n_coeffs = w if n_coeffs is None else n_coeffs
    t = np.arange(w)
    out = np.empty(n_coeffs, dtype=np.complex128)
    for start in range(0, n_coeffs, 256):
        k = np.arange(start, min(start + 256, n_coeffs))
        # reduce k*t mod w in integers so large products keep full precision
        phase = 2 * np.pi * ((k[:, None] * t[None, :]) % w) / w
        out[k] = (np.cos(phase) * x).sum(axis=1) - 1j * (np.sin(phase) * x).sum(axis=1)
    return out


def jacobi_eigh(A: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100):
    """Cyclic Jacobi rotations; eigenvalues ascending with matching columns."""
    A = np.array(A, dtype=np.float64)
    n = A.shape[0]
    V = np.eye(n)
    for _ in range(max_sweeps):
        off = math.sqrt(float((np.triu(A, 1) ** 2).sum()))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * A[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                R = np.eye(n)
                R[p, p] = R[q, q] = c
                R[p, q], R[q, p] = s, -s
                A = R.T @ A @ R
                V = V @ R
    order = np.argsort(np.diag(A))
    return np.diag(A)[order], V[:, order]


def component_count(adjacency) -> int:
    """Union-find over the nonzero pattern of a square matrix."""
    A = adjacency.toarray() if hasattr(adjacency, "toarray") else np.asarray(adjacency)
    n = A.shape[0]
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in zip(*np.nonzero(A)):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[ri] = rj
    return len({find(i) for i in range(n)})


def brute_knn(points, train_idx, train_labels, classes, k):
    """Plain-Python exhaustive KNN with the package's documented tie rules."""
    pts = [list(map(float, row)) for row in points]
    out = []
    for i, p in enumerate(pts):
        cand = []
        for pos, (j, lab) in enumerate(zip(train_idx, train_labels)):
            if j == i:
                continue
            d = math.sqrt(sum((a - b) ** 2 for a, b in zip(p, pts[j])))
            cand.append((d, pos, lab))
        cand.sort()
        nb = cand[:k]
        votes = {c: 0 for c in classes}
        dsum = {c: 0.0 for c in classes}
        for d, _, lab in nb:
            votes[lab] += 1
            dsum[lab] += d
        top = max(votes.values())
        tied = [c for c in classes if votes[c] == top]
        best = min(dsum[c] for c in tied)
        out.append(next(c for c in tied if dsum[c] == best))
    return out


def best_two_partition_sse(X: np.ndarray) -> tuple[float, np.ndarray]:
    """Minimal sse over every split of the rows into two nonempty groups."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    codes = np.arange(1, 2 ** (n - 1))  # point n-1 always in group 0
    masks = ((codes[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)
    total_sq = float((X**2).sum())
    n1 = masks.sum(axis=1)
    s1 = masks.astype(np.float64) @ X
    s0 = X.sum(axis=0) - s1
    sse = total_sq - (s1**2).sum(axis=1) / n1 - (s0**2).sum(axis=1) / (n - n1)
    best = int(np.argmin(sse))
    return float(sse[best]), masks[best]


def brute_align(cluster_labels, truth, classes) -> float:
    """Best accuracy over injective cluster -> class maps (surplus -> wrong)."""
    K = max(cluster_labels) + 1
    slots = list(classes) + [None] * max(0, K - len(classes))
    best = 0
    for perm in itertools.permutations(slots, K):
        hits = sum(1 for c, t in zip(cluster_labels, truth) if perm[c] == t)
        best = max(best, hits)
    return best / len(truth)
