"""Large-margin nearest neighbor metric learning, single and multi-metric.

The metric is parameterized by a linear map ``L`` with ``M = L^T L``. The
multi-metric variant keeps one map per cluster; every pull or push term is
measured with the map of the anchor point's cluster.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ClassTooSmall, DefectiveMatrix, SingularMatrix
from .linalg import project_to_glplus

log = logging.getLogger(__name__)

__all__ = [
    "LmnnConfig",
    "TripletSet",
    "LmnnResult",
    "find_target_neighbors",
    "build_triplets",
    "objective_and_gradient",
    "multi_objective_and_gradient",
    "full_objective",
    "cluster_assignments",
    "train_lmnn",
    "train_multi_metric",
]

ARMIJO_C = 1e-4
BACKTRACK = 0.5
MIN_STEP = 1e-14


@dataclass(frozen=True)
class LmnnConfig:
    k: int = 3
    mu: float = 0.5
    learning_rate: float = 1e-2
    max_iters: int = 200
    tolerance: float = 1e-7
    enforce_glplus: bool = True
    clustering: str = "class"
    n_clusters: int = None
    refresh_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")
        if self.learning_rate <= 0 or self.tolerance <= 0:
            raise ValueError("learning_rate and tolerance must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.refresh_every < 1:
            raise ValueError("refresh_every must be >= 1")
        if self.clustering not in ("class", "kmeans"):
            raise ValueError("clustering must be 'class' or 'kmeans'")
        if self.clustering == "kmeans" and (self.n_clusters is None
                                            or self.n_clusters < 1):
            raise ValueError("kmeans clustering needs n_clusters >= 1")


@dataclass(frozen=True)
class TripletSet:
    """Target pairs ``(i, j)`` and impostor triplets ``(i, j, l)``."""

    targets: np.ndarray
    triplets: np.ndarray = field(
        default_factory=lambda: np.empty((0, 3), dtype=np.int64))

    def __post_init__(self):
        object.__setattr__(self, "targets", np.asarray(
            self.targets, dtype=np.int64).reshape(-1, 2))
        object.__setattr__(self, "triplets", np.asarray(
            self.triplets, dtype=np.int64).reshape(-1, 3))


@dataclass
class LmnnResult:
    matrices: np.ndarray
    assignments: np.ndarray
    cluster_labels: np.ndarray
    centers: np.ndarray
    history: list
    determinants: list
    iterations: int
    converged: bool
    no_descent: bool

    @property
    def L(self):
        if len(self.matrices) != 1:
            raise ValueError("multiple component matrices; use .matrices")
        return self.matrices[0]


def find_target_neighbors(data, k):
    """The ``k`` nearest same-class points of every sample (Euclidean).

    Distance ties go to the lower index. Returns an ``(n*k, 2)`` array of
    ``(i, j)`` pairs, grouped by ``i``.
    """
    X, y = data.points, data.labels
    _, counts = np.unique(y, return_counts=True)
    if counts.size and counts.min() <= k:
        raise ClassTooSmall(
            f"every class needs more than k={k} members; "
            f"smallest has {counts.min()}")
    pairs = []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        P = X[idx]
        D = ((P[:, None, :] - P[None, :, :]) ** 2).sum(-1)
        np.fill_diagonal(D, np.inf)
        order = np.argsort(D, axis=1, kind="stable")[:, :k]
        for row, i in enumerate(idx):
            pairs.extend((i, idx[j]) for j in order[row])
    pairs.sort(key=lambda p: p[0])
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def _stack(L):
    L = np.asarray(L, dtype=float)
    return L[None] if L.ndim == 2 else L


def _anchor_sqdist(Ls, assign, X):
    """Squared distances ``||L_{c(i)} (x_i - x_m)||^2`` for all i, m."""
    n = X.shape[0]
    D = np.empty((n, n))
    for c in range(Ls.shape[0]):
        rows = np.flatnonzero(assign == c)
        if rows.size == 0:
            continue
        Z = X @ Ls[c].T
        diff = Z[rows, None, :] - Z[None, :, :]
        D[rows] = (diff ** 2).sum(-1)
    return D


def build_triplets(data, targets, L=None, assignments=None):
    """Active impostor triplets under the current metric.

    ``(i, j, l)`` is kept when ``l`` has a different label from ``i`` and
    ``1 + d(i, j) - d(i, l) > 0`` with squared distances measured by the map
    of ``i``'s cluster. Exact equality contributes no gradient and is left
    out.
    """
    X, y = data.points, data.labels
    targets = np.asarray(targets, dtype=np.int64).reshape(-1, 2)
    if L is None:
        L = np.eye(data.dim)
    Ls = _stack(L)
    if assignments is None:
        assignments = np.zeros(data.n, dtype=np.int64)
    D = _anchor_sqdist(Ls, assignments, X)
    out = []
    for i, j in targets:
        viol = (y != y[i]) & (1.0 + D[i, j] - D[i] > 0.0)
        for l in np.flatnonzero(viol):
            out.append((i, j, l))
    triplets = np.array(out, dtype=np.int64).reshape(-1, 3)
    return TripletSet(targets=targets, triplets=triplets)


def multi_objective_and_gradient(Ls, assignments, data, triplets, mu):
    """Objective and per-cluster gradient for a stack of maps ``Ls``."""
    Ls = _stack(Ls)
    X = data.points
    q, d = Ls.shape[0], data.dim
    outer = np.zeros((q, d, d))
    value = 0.0
    T = triplets.targets
    if len(T):
        diff = X[T[:, 0]] - X[T[:, 1]]
        owner = assignments[T[:, 0]]
        for c in range(q):
            sel = diff[owner == c]
            if sel.size:
                value += ((sel @ Ls[c].T) ** 2).sum()
                outer[c] += sel.T @ sel
    R = triplets.triplets
    if len(R) and mu > 0:
        dij = X[R[:, 0]] - X[R[:, 1]]
        dil = X[R[:, 0]] - X[R[:, 2]]
        owner = assignments[R[:, 0]]
        for c in range(q):
            m = owner == c
            if not m.any():
                continue
            a, b = dij[m], dil[m]
            margin = (1.0 + ((a @ Ls[c].T) ** 2).sum(1)
                      - ((b @ Ls[c].T) ** 2).sum(1))
            act = margin > 0.0
            if act.any():
                value += mu * margin[act].sum()
                a, b = a[act], b[act]
                outer[c] += mu * (a.T @ a - b.T @ b)
    grad = 2.0 * np.einsum("cij,cjk->cik", Ls, outer)
    return value, grad


def objective_and_gradient(L, data, triplets, mu):
    """Pull term plus ``mu`` times the impostor hinge, and d/dL of it."""
    L = np.asarray(L, dtype=float)
    assign = np.zeros(data.n, dtype=np.int64)
    value, grad = multi_objective_and_gradient(L[None], assign, data,
                                               triplets, mu)
    return value, grad[0]


def full_objective(Ls, assignments, data, targets, mu):
    """Objective with every impostor considered, no cached active set."""
    Ls = _stack(Ls)
    X, y = data.points, data.labels
    targets = np.asarray(targets, dtype=np.int64).reshape(-1, 2)
    if len(targets) == 0:
        return 0.0
    D = _anchor_sqdist(Ls, assignments, X)
    i, j = targets[:, 0], targets[:, 1]
    dij = D[i, j]
    value = dij.sum()
    if mu > 0:
        hinge = 1.0 + dij[:, None] - D[i]
        hinge = np.where(y[None, :] != y[i][:, None], hinge, 0.0)
        value += mu * np.maximum(hinge, 0.0).sum()
    return float(value)


def cluster_assignments(config, data):
    """Cluster index per point, the label each cluster came from, centers."""
    X, y = data.points, data.labels
    if config.clustering == "class":
        labels = np.unique(y)
        assign = np.searchsorted(labels, y)
    else:
        from sklearn.cluster import KMeans

        km = KMeans(n_clusters=config.n_clusters, n_init=20,
                    random_state=config.seed).fit(X)
        assign = km.labels_.astype(np.int64)
        labels = np.arange(config.n_clusters)
    centers = np.array([X[assign == c].mean(axis=0)
                        for c in range(len(labels))])
    return assign, labels, centers


def _repair(Ls):
    for c in range(Ls.shape[0]):
        if np.linalg.det(Ls[c]) <= 0:
            Ls[c] = project_to_glplus(Ls[c])
    return Ls


def _optimize(config, data, assign, init=None):
    q, d = int(assign.max()) + 1 if assign.size else 1, data.dim
    Ls = (np.repeat(np.eye(d)[None], q, axis=0) if init is None
          else np.array(_stack(init), dtype=float))
    if config.enforce_glplus:
        Ls = _repair(Ls)
    targets = find_target_neighbors(data, config.k)
    mu = config.mu
    history = [full_objective(Ls, assign, data, targets, mu)]
    dets = [np.linalg.det(Ls)]
    step = config.learning_rate
    converged = no_descent = False
    triplets = None
    fresh = False
    it = 0
    while it < config.max_iters:
        if triplets is None or it % config.refresh_every == 0:
            if not fresh:
                triplets = build_triplets(data, targets, Ls, assign)
            fresh = True
        f0, G = multi_objective_and_gradient(Ls, assign, data, triplets, mu)
        gnorm2 = float((G ** 2).sum())
        if gnorm2 == 0.0:
            converged = True
            break
        accepted = None
        while step >= MIN_STEP:
            cand = Ls - step * G
            if config.enforce_glplus:
                try:
                    cand = _repair(cand)
                except (SingularMatrix, DefectiveMatrix):
                    step *= BACKTRACK
                    continue
            f1, _ = multi_objective_and_gradient(cand, assign, data,
                                                 triplets, mu)
            if f1 <= f0 + ARMIJO_C * float((G * (cand - Ls)).sum()):
                full = full_objective(cand, assign, data, targets, mu)
                if full <= history[-1]:
                    accepted = (cand, full)
                    break
            step *= BACKTRACK
        if accepted is None:
            if fresh:
                no_descent = True
                log.warning("line search failed at iteration %d; returning "
                            "best iterate", it)
                break
            triplets = build_triplets(data, targets, Ls, assign)
            fresh = True
            step = config.learning_rate
            continue
        fresh = False
        Ls, value = accepted
        prev = history[-1]
        history.append(value)
        dets.append(np.linalg.det(Ls))
        it += 1
        step *= 2.0
        if prev - value <= config.tolerance * max(1.0, abs(prev)):
            converged = True
            break
    return Ls, targets, history, dets, it, converged, no_descent


def train_lmnn(config, data, init=None):
    """Single global metric by projected gradient descent on ``L``."""
    assign = np.zeros(data.n, dtype=np.int64)
    Ls, _, history, dets, it, conv, nd = _optimize(config, data, assign,
                                                   init)
    return LmnnResult(matrices=Ls, assignments=assign,
                      cluster_labels=np.array([0]),
                      centers=data.points.mean(axis=0)[None],
                      history=history, determinants=dets, iterations=it,
                      converged=conv, no_descent=nd)


def train_multi_metric(config, data, init=None):
    """One map per cluster, learned jointly (multi-metric LMNN).

    Clusters are the classes by default or k-means groups. With
    ``enforce_glplus`` every accepted iterate keeps ``det L_c > 0``.
    """
    assign, labels, centers = cluster_assignments(config, data)
    Ls, _, history, dets, it, conv, nd = _optimize(config, data, assign,
                                                   init)
    return LmnnResult(matrices=Ls, assignments=assign, cluster_labels=labels,
                      centers=centers, history=history, determinants=dets,
                      iterations=it, converged=conv, no_descent=nd)
