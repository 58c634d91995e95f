"""Velocity fusion of local affine maps into one diffeomorphic warp.

Each component is an affine map in homogeneous coordinates anchored at a
cluster center. Its principal log defines a stationary velocity field
``V_k(x) = log(A_k) [x; 1]``; the fields are blended with normalized radial
weights and the blend is integrated over unit time with fixed-step RK4.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFinite
from .linalg import as_square, check_nonsingular, mat_exp, mat_log

__all__ = [
    "ComponentTransform",
    "FusionAtlas",
    "homogeneous",
    "default_sigmas",
    "atlas_from_linear",
    "normalized_weights",
    "component_velocity",
    "fused_velocity",
    "integrate_flow",
    "forward",
    "backward",
    "jacobian_grid",
    "jacobian_determinants",
    "displacement_fusion",
    "flow_matrix",
    "FORWARD",
    "BACKWARD",
]

FORWARD = "forward"
BACKWARD = "backward"
DEFAULT_STEPS = 32
WEIGHT_FLOOR = 1e-300


def homogeneous(L, center):
    """Embed ``x -> c + L (x - c)`` as a (d+1)x(d+1) affine matrix."""
    L = as_square(L, "L")
    c = np.asarray(center, dtype=float).reshape(-1)
    d = L.shape[0]
    if c.shape[0] != d:
        raise ValueError(f"center has {c.shape[0]} entries, expected {d}")
    A = np.eye(d + 1)
    A[:d, :d] = L
    A[:d, d] = c - L @ c
    return A


@dataclass(frozen=True)
class ComponentTransform:
    """One local map: affine matrix, anchor center and attenuation sigma."""

    linear: np.ndarray
    center: np.ndarray
    sigma: float
    log_linear: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        A = as_square(self.linear, "linear")
        n = A.shape[0]
        if n < 2:
            raise ValueError("homogeneous matrix must be at least 2x2")
        bottom = np.zeros(n)
        bottom[-1] = 1.0
        if not np.array_equal(A[-1], bottom):
            raise ValueError("bottom row must be (0, ..., 0, 1)")
        block = A[:-1, :-1]
        det = check_nonsingular(block)
        if det <= 0:
            raise ValueError("linear block must have positive determinant")
        c = np.asarray(self.center, dtype=float).reshape(-1)
        if c.shape[0] != n - 1:
            raise ValueError("center dimension mismatch")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        logA = self.log_linear
        logA = mat_log(A) if logA is None else as_square(logA, "log_linear")
        # log of an affine matrix is affine-algebra valued: zero bottom row
        logA = logA.copy()
        logA[-1] = 0.0
        object.__setattr__(self, "linear", A)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "log_linear", logA)

    @classmethod
    def from_linear(cls, L, center, sigma):
        return cls(homogeneous(L, center), center, sigma)

    @property
    def dim(self):
        return self.center.shape[0]


@dataclass(frozen=True)
class FusionAtlas:
    components: tuple
    steps: int = DEFAULT_STEPS
    weight_floor: float = WEIGHT_FLOOR

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("atlas needs at least one component")
        dims = {c.dim for c in comps}
        if len(dims) != 1:
            raise ValueError("components disagree on dimension")
        if int(self.steps) < 1:
            raise ValueError("steps must be >= 1")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dim(self):
        return self.components[0].dim

    @property
    def q(self):
        return len(self.components)

    def with_steps(self, steps):
        return FusionAtlas(self.components, steps, self.weight_floor)

    # stacked views used by the vectorized kernels
    @property
    def _centers(self):
        return np.array([c.center for c in self.components])

    @property
    def _sigmas(self):
        return np.array([c.sigma for c in self.components])

    @property
    def _logs(self):
        return np.array([c.log_linear for c in self.components])

    @property
    def _mats(self):
        return np.array([c.linear for c in self.components])


def default_sigmas(points, assignments, centers):
    """Root-mean-square member distance to each cluster center."""
    points = np.asarray(points, dtype=float)
    out = []
    for c, center in enumerate(np.asarray(centers, dtype=float)):
        members = points[assignments == c]
        r = np.sqrt(((members - center) ** 2).sum(1).mean()) if len(
            members) else 0.0
        out.append(r if r > 0 else 1.0)
    return np.array(out)


def atlas_from_linear(matrices, centers, sigmas, steps=DEFAULT_STEPS):
    comps = tuple(ComponentTransform.from_linear(L, c, s)
                  for L, c, s in zip(matrices, centers, sigmas))
    return FusionAtlas(comps, steps)


def _points(x, dim):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != dim:
        raise ValueError(f"points must have {dim} coordinates")
    return X, single


def _weights(atlas, X):
    C, S = atlas._centers, atlas._sigmas
    r2 = ((X[:, None, :] - C[None]) ** 2).sum(-1) / S[None] ** 2
    raw = 1.0 / (1.0 + r2)
    total = np.maximum(raw.sum(1, keepdims=True), atlas.weight_floor)
    return raw / total


def normalized_weights(atlas, x):
    """Radial weights ``1 / (1 + (|x - c_k| / sigma_k)^2)`` summing to one."""
    X, single = _points(x, atlas.dim)
    W = _weights(atlas, X)
    return W[0] if single else W


def _affine_apply(M, X):
    # M: (..., d+1, d+1) acting on X: (n, d) -> (..., n, d)
    d = X.shape[1]
    return X @ np.swapaxes(M[..., :d, :d], -1, -2) + M[..., None, :d, d]


def component_velocity(comp, x):
    """Stationary velocity ``log(A) [x; 1]`` (top d rows)."""
    X, single = _points(x, comp.dim)
    V = _affine_apply(comp.log_linear, X)
    return V[0] if single else V


def _fused(atlas, X, logs):
    W = _weights(atlas, X)
    V = _affine_apply(logs, X)
    return np.einsum("nk,knd->nd", W, V)


def fused_velocity(atlas, x):
    X, single = _points(x, atlas.dim)
    V = _fused(atlas, X, atlas._logs)
    return V[0] if single else V


def integrate_flow(atlas, x0, direction=FORWARD, steps=None):
    """Unit-time RK4 flow of the fused field; backward negates the field."""
    if direction not in (FORWARD, BACKWARD):
        raise ValueError(f"unknown direction {direction!r}")
    X, single = _points(x0, atlas.dim)
    n_steps = atlas.steps if steps is None else int(steps)
    if n_steps < 1:
        raise ValueError("steps must be >= 1")
    logs = atlas._logs if direction == FORWARD else -atlas._logs
    h = 1.0 / n_steps
    X = X.copy()
    for _ in range(n_steps):
        k1 = _fused(atlas, X, logs)
        k2 = _fused(atlas, X + 0.5 * h * k1, logs)
        k3 = _fused(atlas, X + 0.5 * h * k2, logs)
        k4 = _fused(atlas, X + h * k3, logs)
        X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(X)):
            raise NonFinite("flow trajectory diverged; check atlas scale")
    return X[0] if single else X


def forward(atlas, x):
    return integrate_flow(atlas, x, FORWARD)


def backward(atlas, x):
    return integrate_flow(atlas, x, BACKWARD)


def displacement_fusion(atlas, x):
    """Weighted average of component destinations (folds in general)."""
    X, single = _points(x, atlas.dim)
    W = _weights(atlas, X)
    Y = np.einsum("nk,knd->nd", W, _affine_apply(atlas._mats, X))
    return Y[0] if single else Y


def jacobian_determinants(warp, grid, h):
    """Central-difference Jacobian determinant of ``warp`` at grid points."""
    if not h > 0:
        raise ValueError("h must be positive")
    G = np.atleast_2d(np.asarray(grid, dtype=float))
    n, d = G.shape
    J = np.empty((n, d, d))
    for a in range(d):
        e = np.zeros(d)
        e[a] = h
        J[:, :, a] = (warp(G + e) - warp(G - e)) / (2.0 * h)
    return np.linalg.det(J)


def jacobian_grid(atlas, grid, h=1e-4, mode="flow"):
    """Jacobian determinants of the forward warp (or of the baseline)."""
    if mode == "flow":
        warp = lambda X: integrate_flow(atlas, X, FORWARD)
    elif mode == "displacement":
        warp = lambda X: displacement_fusion(atlas, X)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return jacobian_determinants(warp, grid, h)


def flow_matrix(comp, t=1.0):
    """Closed-form single-component flow ``exp(t log A)``."""
    return mat_exp(t * comp.log_linear)
