"""
K-means with seeded restarts, K-nearest-neighbor labeling against a training
subset, and scoring (confusion matrices, accuracy, cluster/class alignment).
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Sequence

import numpy as np

from .errors import ClassifyError

DEFAULT_RESTARTS = 1000
DEFAULT_MAX_ITERS = 300
DEFAULT_KNN = 15
MAX_ALIGN_CLUSTERS = 8


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    centers: np.ndarray
    sse: float
    # per-run bookkeeping; empty for a single Lloyd run
    restart_sse: tuple[float, ...] = field(default=(), repr=False)
    best_restart: int = 0

    @property
    def K(self) -> int:
        return self.centers.shape[0]


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _sse(points: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> float:
    r = points - centers[labels]
    return float(np.einsum("nd,nd->", r, r))


def lloyd(
    points: np.ndarray,
    init_centers: np.ndarray,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> tuple[ClusterAssignment, list[float]]:
    """
    One Lloyd run from the given centers.

    Returns the assignment and the sse measured after every assignment step;
    that sequence is non-increasing.  An empty cluster is re-seeded with the
    point farthest from its current center.
    """
    X = np.asarray(points, dtype=np.float64)
    centers = np.array(init_centers, dtype=np.float64)
    K = centers.shape[0]
    labels = np.full(X.shape[0], -1)
    history: list[float] = []
    for _ in range(max_iters):
        d2 = _sq_dists(X, centers)
        new = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(X.shape[0]), new].sum()))
        if np.array_equal(new, labels):
            break
        labels = new
        own = d2[np.arange(X.shape[0]), labels]
        taken: set[int] = set()
        for c in range(K):
            members = labels == c
            if members.any():
                centers[c] = X[members].mean(axis=0)
                continue
            for p in np.argsort(-own, kind="stable"):
                if int(p) not in taken:
                    break
            taken.add(int(p))
            centers[c] = X[p]
    else:
        labels = np.argmin(_sq_dists(X, centers), axis=1)
    for c in range(K):
        members = labels == c
        if members.any():
            centers[c] = X[members].mean(axis=0)
    return ClusterAssignment(labels=labels, centers=centers, sse=_sse(X, labels, centers)), history


def restart_rng(seed: int, restart: int) -> np.random.Generator:
    """Independent stream for one restart, fixed by (seed, restart index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(restart)]))


def kmeans(
    points: np.ndarray,
    K: int,
    restarts: int = DEFAULT_RESTARTS,
    max_iters: int = DEFAULT_MAX_ITERS,
    seed: int = 0,
    threads: int = 1,
) -> ClusterAssignment:
    """
    Best-of-``restarts`` Lloyd clustering.

    Each restart draws K distinct points uniformly as initial centers from
    its own (seed, restart) stream, so the result does not depend on
    ``threads``.  The run with minimal sse wins; ties go to the lower restart
    index.
    """
    X = np.asarray(points, dtype=np.float64)
    n = X.shape[0]
    if not 1 <= K <= n:
        raise ClassifyError(f"K={K} clusters requested for {n} points")
    if restarts < 1:
        raise ClassifyError("need at least one restart")

    def run(r: int) -> ClusterAssignment:
        init = X[restart_rng(seed, r).choice(n, size=K, replace=False)]
        return lloyd(X, init, max_iters)[0]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(restarts)))
    else:
        results = [run(r) for r in range(restarts)]
    sses = tuple(res.sse for res in results)
    best = int(np.argmin(sses))
    win = results[best]
    return ClusterAssignment(win.labels, win.centers, win.sse, restart_sse=sses, best_restart=best)


@dataclass(frozen=True)
class LabeledSet:
    """Training windows and their classes; ``classes`` fixes the class order."""

    indices: np.ndarray
    labels: tuple
    classes: tuple

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        labels = tuple(self.labels)
        classes = tuple(self.classes) if self.classes else tuple(dict.fromkeys(labels))
        if idx.size != len(labels):
            raise ClassifyError("indices and labels differ in length")
        if np.unique(idx).size != idx.size:
            raise ClassifyError("training indices are not unique")
        unknown = set(labels) - set(classes)
        if unknown:
            raise ClassifyError(f"training labels {sorted(map(str, unknown))} not in class order")
        missing = [c for c in classes if c not in labels]
        if missing:
            raise ClassifyError(f"no training points for classes {missing}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "classes", classes)

    def codes(self) -> np.ndarray:
        pos = {c: k for k, c in enumerate(self.classes)}
        return np.array([pos[l] for l in self.labels], dtype=np.int64)


def knn_classify(points: np.ndarray, train: LabeledSet, k: int = DEFAULT_KNN) -> np.ndarray:
    """
    Label every row by majority vote of its ``k`` nearest training rows.

    A training row never counts as its own neighbor, so it can be outvoted
    into another class.  Neighbors at equal distance are taken in training
    order; a tied vote goes to the tied class with the smaller summed
    neighbor distance, then to the earlier class.  Returns an object array of
    class identifiers.
    """
    X = np.asarray(points, dtype=np.float64)
    n = X.shape[0]
    T = train.indices.size
    if not 1 <= k <= T:
        raise ClassifyError(f"k={k} neighbors requested from {T} training points")
    if train.indices.min() < 0 or train.indices.max() >= n:
        raise ClassifyError("training index out of range")
    if k == T and T < 2:
        raise ClassifyError("a lone training point has no neighbors besides itself")
    codes = train.codes()
    C = len(train.classes)

    diff = X[:, None, :] - X[train.indices][None, :, :]
    dist = np.sqrt(np.einsum("ntd,ntd->nt", diff, diff))
    dist[train.indices, np.arange(T)] = np.inf
    order = np.argsort(dist, axis=1, kind="stable")

    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        kk = k if np.isfinite(dist[i, order[i, k - 1]]) else k - 1
        nb = order[i, :kk]
        votes = np.bincount(codes[nb], minlength=C)
        tied = np.flatnonzero(votes == votes.max())
        if tied.size > 1:
            dsum = np.array([dist[i, nb[codes[nb] == c]].sum() for c in tied])
            tied = tied[dsum == dsum.min()]
        out[i] = tied[0]
    classes = np.empty(C, dtype=object)
    classes[:] = train.classes
    return classes[out]


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    classes: tuple
    counts: np.ndarray

    def to_json(self) -> str:
        rows = ",\n    ".join(json.dumps(r) for r in self.counts.tolist())
        classes = json.dumps([str(c) for c in self.classes])
        return f'{{\n  "classes": {classes},\n  "counts": [\n    {rows}\n  ]\n}}\n'

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_json())
        return path

    @classmethod
    def load(cls, path: str | Path) -> "ConfusionMatrix":
        data = json.loads(Path(path).read_text())
        return cls(tuple(data["classes"]), np.array(data["counts"], dtype=np.int64))


def confusion(true_labels: Sequence[Hashable], predicted: Sequence[Hashable], classes: Sequence[Hashable]) -> ConfusionMatrix:
    classes = tuple(classes)
    pos = {c: k for k, c in enumerate(classes)}
    if len(true_labels) != len(predicted):
        raise ClassifyError(f"{len(true_labels)} true labels vs {len(predicted)} predictions")
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(true_labels, predicted):
        try:
            counts[pos[t], pos[p]] += 1
        except KeyError as exc:
            raise ClassifyError(f"label {exc.args[0]!r} not in class order {classes}") from None
    return ConfusionMatrix(classes, counts)


def accuracy(cm: ConfusionMatrix | np.ndarray) -> float:
    counts = np.asarray(getattr(cm, "counts", cm))
    total = counts.sum()
    if counts.size == 0 or total <= 0:
        raise ClassifyError("accuracy of an empty confusion matrix")
    return float(np.trace(counts) / total)


def align_clusters(
    assignment: ClusterAssignment | np.ndarray,
    true_labels: Sequence[Hashable],
    classes: Sequence[Hashable] | None = None,
) -> tuple[dict[int, Hashable | None], float]:
    """
    Cluster-to-class mapping that maximizes accuracy, by exhaustive search.

    With more clusters than classes, the surplus clusters map to ``None`` and
    their members count as misclassified.  Among equally good mappings the
    first in lexicographic permutation order wins.
    """
    labels = np.asarray(getattr(assignment, "labels", assignment), dtype=np.int64)
    true_labels = list(true_labels)
    if len(true_labels) != labels.size:
        raise ClassifyError("assignment and truth differ in length")
    classes = tuple(dict.fromkeys(true_labels)) if classes is None else tuple(classes)
    K = int(getattr(assignment, "K", labels.max() + 1))
    if K > MAX_ALIGN_CLUSTERS:
        raise ClassifyError(f"exhaustive alignment limited to {MAX_ALIGN_CLUSTERS} clusters, got {K}")
    pos = {c: k for k, c in enumerate(classes)}
    truth = np.array([pos.get(t, -1) for t in true_labels])
    # contingency[c, j] = # windows in cluster c whose true class is j
    C = len(classes)
    contingency = np.zeros((K, max(C, K)), dtype=np.int64)
    ok = truth >= 0
    np.add.at(contingency, (labels[ok], truth[ok]), 1)

    best_perm, best_hits = None, -1
    for perm in itertools.permutations(range(max(C, K)), K):
        hits = int(contingency[np.arange(K), perm].sum())
        if hits > best_hits:
            best_perm, best_hits = perm, hits
    mapping = {c: (classes[j] if j < C else None) for c, j in enumerate(best_perm)}
    return mapping, best_hits / labels.size
