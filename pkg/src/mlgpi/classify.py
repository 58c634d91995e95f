"""k-NN classification in learned spaces, cross-validation and boundaries."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, Standardizer
from .errors import ClassTooSmall, EmptyTrainingSet
from .fusion import (atlas_from_linear, default_sigmas, displacement_fusion,
                     forward, normalized_weights)
from .lmnn import LmnnConfig, train_multi_metric

__all__ = [
    "EvaluationReport",
    "FUSION_KINDS",
    "TrainedModel",
    "gpi_distance",
    "plml_distance",
    "euclidean_pairwise",
    "knn_vote",
    "knn_classify",
    "knn_predict",
    "fit_model",
    "stratified_folds",
    "cross_validate",
    "grid_points",
    "boundary_grid",
    "boundary_shift",
    "make_pipeline",
]

FUSION_KINDS = ("velocity", "displacement", "plml", "mmlmnn", "none")
DEFAULT_K = 3


@dataclass(frozen=True)
class EvaluationReport:
    per_fold_accuracy: tuple
    mean: float
    std: float
    max: float
    min: float

    @classmethod
    def from_accuracies(cls, accs):
        a = np.asarray(accs, dtype=float)
        return cls(tuple(float(v) for v in a), float(a.mean()),
                   float(a.std()), float(a.max()), float(a.min()))

    def as_text(self):
        lines = [f"fold {i + 1}: {acc:.4f}"
                 for i, acc in enumerate(self.per_fold_accuracy)]
        lines.append(f"mean: {self.mean:.4f} +- {self.std:.4f}")
        lines.append(f"max: {self.max:.4f}")
        lines.append(f"min: {self.min:.4f}")
        return "\n".join(lines)

    def as_csv(self):
        rows = ["fold,accuracy"]
        rows += [f"{i + 1},{acc!r}"
                 for i, acc in enumerate(self.per_fold_accuracy)]
        rows += [f"mean,{self.mean!r}", f"std,{self.std!r}",
                 f"max,{self.max!r}", f"min,{self.min!r}"]
        return "\n".join(rows) + "\n"


def gpi_distance(atlas, xi, xj):
    """Euclidean distance between the forward-warped images of two points."""
    yi, yj = forward(atlas, np.vstack([xi, xj]))
    return float(np.linalg.norm(yi - yj))


def plml_distance(weights_at_i, metrics, xi, xj):
    """``sqrt(sum_k W_k (xi - xj)^T M_k (xi - xj))``."""
    diff = np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float)
    d2 = sum(w * float(diff @ np.asarray(M, dtype=float) @ diff)
             for w, M in zip(weights_at_i, metrics))
    return float(np.sqrt(max(d2, 0.0)))


def euclidean_pairwise(A, B):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    return np.sqrt(((A[:, None, :] - B[None, :, :]) ** 2).sum(-1))


def knn_vote(dist_row, labels, k):
    """Majority label of the ``k`` closest; ties to lowest index / label."""
    order = np.argsort(dist_row, kind="stable")[:k]
    counts = np.bincount(labels[order])
    return int(np.argmax(counts))


def knn_classify(train, query, k, distance):
    """Label of ``query`` by k-NN under a pairwise ``distance(a, b)``."""
    if train.n == 0:
        raise EmptyTrainingSet("no training points")
    if not 1 <= k <= train.n:
        raise ValueError(f"k must lie in [1, {train.n}]")
    row = np.array([distance(query, x) for x in train.points])
    return knn_vote(row, train.labels, k)


def knn_predict(D, labels, k):
    """Batch k-NN from a ``(queries, train)`` distance matrix."""
    D = np.atleast_2d(D)
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyTrainingSet("no training points")
    if not 1 <= k <= labels.size:
        raise ValueError(f"k must lie in [1, {labels.size}]")
    return np.array([knn_vote(row, labels, k) for row in D], dtype=np.int64)


@dataclass
class TrainedModel:
    """A learned metric plus the training set it classifies against.

    ``kind`` picks how queries are compared with training points:
    ``velocity`` warps both through the fused flow, ``displacement`` through
    the weighted-average baseline, ``plml`` blends component Mahalanobis
    distances with the query's weights, ``mmlmnn`` uses the metric of each
    training point's cluster and ``none`` is plain Euclidean.
    """

    kind: str
    train: LabeledDataset
    k: int = DEFAULT_K
    atlas: object = None
    matrices: np.ndarray = None
    assignments: np.ndarray = None

    def __post_init__(self):
        if self.kind not in FUSION_KINDS:
            raise ValueError(f"unknown fusion kind {self.kind!r}")
        self._cache = None

    def embed(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "velocity":
            return forward(self.atlas, X)
        if self.kind == "displacement":
            return displacement_fusion(self.atlas, X)
        return X

    def _train_embedding(self):
        if self._cache is None:
            self._cache = self.embed(self.train.points)
        return self._cache

    def distances(self, queries):
        Q = np.atleast_2d(np.asarray(queries, dtype=float))
        X = self.train.points
        if self.kind in ("velocity", "displacement", "none"):
            return euclidean_pairwise(self.embed(Q), self._train_embedding())
        diff = Q[:, None, :] - X[None, :, :]
        if self.kind == "mmlmnn":
            Ls = self.matrices[self.assignments]
            proj = np.einsum("nab,mnb->mna", Ls, diff)
            return np.sqrt((proj ** 2).sum(-1))
        W = normalized_weights(self.atlas, Q)
        d2 = np.zeros(diff.shape[:2])
        for c, L in enumerate(self.matrices):
            d2 += W[:, c:c + 1] * ((diff @ L.T) ** 2).sum(-1)
        return np.sqrt(d2)

    def predict(self, queries):
        return knn_predict(self.distances(queries), self.train.labels, self.k)


def fit_model(data, kind="velocity", config=None, k=DEFAULT_K, sigma="auto",
              steps=32, result=None):
    """Train component metrics on ``data`` and wrap them for k-NN.

    ``result`` may carry an already trained multi-metric result so several
    fusion kinds can share one training run.
    """
    if kind not in FUSION_KINDS:
        raise ValueError(f"unknown fusion kind {kind!r}")
    if kind == "none":
        return TrainedModel("none", data, k)
    config = config or LmnnConfig()
    if result is None:
        result = train_multi_metric(config, data)
    if sigma == "auto" or sigma is None:
        sigmas = default_sigmas(data.points, result.assignments,
                                result.centers)
    else:
        sigmas = np.full(len(result.matrices), float(sigma))
    atlas = atlas_from_linear(result.matrices, result.centers, sigmas, steps)
    return TrainedModel(kind, data, k, atlas, np.array(result.matrices),
                        result.assignments)


def stratified_folds(labels, folds, seed=0):
    """Fold id per sample: classes shuffled, then dealt round-robin."""
    labels = np.asarray(labels)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    classes, counts = np.unique(labels, return_counts=True)
    if counts.min() < folds:
        raise ClassTooSmall(
            f"class {classes[np.argmin(counts)]} has {counts.min()} members,"
            f" fewer than {folds} folds")
    rng = np.random.default_rng(seed)
    fold_ids = np.empty(labels.shape[0], dtype=np.int64)
    offset = 0
    for c in classes:
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        fold_ids[idx] = (offset + np.arange(idx.size)) % folds
        offset += idx.size
    return fold_ids


def cross_validate(data, folds, pipeline, seed=0, fold_ids=None,
                   workers=1):
    """Stratified k-fold accuracy of ``pipeline``.

    ``pipeline(train)`` returns a predictor mapping an ``(m, d)`` array to
    labels. ``fold_ids`` overrides the seeded fold assignment.
    """
    if fold_ids is None:
        fold_ids = stratified_folds(data.labels, folds, seed)
    fold_ids = np.asarray(fold_ids)

    def run(f):
        test = fold_ids == f
        predictor = pipeline(data.subset(~test))
        pred = np.asarray(predictor(data.points[test]))
        return float(np.mean(pred == data.labels[test]))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            accs = list(pool.map(run, range(folds)))
    else:
        accs = [run(f) for f in range(folds)]
    return EvaluationReport.from_accuracies(accs)


def grid_points(xmin, xmax, nx, ymin, ymax, ny):
    """Row-major grid (y outer, x inner) as an ``(nx*ny, 2)`` array."""
    xs = np.linspace(xmin, xmax, nx)
    ys = np.linspace(ymin, ymax, ny)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def boundary_grid(train, k, distance, grid):
    """k-NN label at every grid point.

    ``distance(queries, points)`` returns the pairwise distance matrix.
    """
    D = distance(np.atleast_2d(grid), train.points)
    return knn_predict(D, train.labels, k)


def boundary_shift(grid, labels, nx, truth=0.0):
    """Mean |x - truth| over label-flip locations along each grid row.

    A flip location is the midpoint between horizontally adjacent grid
    points with different labels. ``truth`` is a scalar or one reference x
    per grid row. Returns ``inf`` when no row flips.
    """
    G = np.asarray(grid, dtype=float).reshape(-1, nx, 2)
    lab = np.asarray(labels).reshape(-1, nx)
    ref = np.broadcast_to(np.asarray(truth, dtype=float), (G.shape[0],))
    dev = []
    for row, lrow, t in zip(G, lab, ref):
        change = np.flatnonzero(lrow[1:] != lrow[:-1])
        dev.extend(np.abs(0.5 * (row[change, 0] + row[change + 1, 0]) - t))
    if not dev:
        return float("inf")
    return float(np.mean(dev))


def make_pipeline(kind, config=None, k=DEFAULT_K, sigma="auto", steps=32,
                  standardize=True):
    """Cross-validation recipe: standardize on the fold, train, predict."""
    def pipeline(train):
        scaler = (Standardizer.fit(train.points) if standardize
                  else Standardizer.identity(train.dim))
        model = fit_model(scaler.apply(train), kind, config, k=k,
                          sigma=sigma, steps=steps)
        return lambda X: model.predict(scaler.transform(X))

    return pipeline
