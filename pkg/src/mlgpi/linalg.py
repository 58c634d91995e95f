"""Dense real matrix functions for the GL+ machinery.

Matrix exponential (scaling and squaring, Pade up to degree 13), principal
logarithm (real Schur form, inverse scaling and squaring), determinant-sign
repair and geodesic interpolation between group elements.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DefectiveMatrix, NonPrincipalLog, SingularMatrix

__all__ = [
    "Spectrum",
    "as_square",
    "spectrum",
    "check_nonsingular",
    "mat_exp",
    "mat_log",
    "project_to_glplus",
    "geodesic_interp",
    "regularize",
    "SINGULAR_RTOL",
    "REGULARIZATION_EPS",
    "CONDITION_LIMIT",
]

SINGULAR_RTOL = 1e-12
REGULARIZATION_EPS = 1e-8
CONDITION_LIMIT = 1e10

# Pade numerator coefficients b_0..b_m for exp, degrees 3..13.
_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0,
        1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}
# Largest 1-norm for which each degree reaches unit roundoff (Higham 2005).
_EXP_THETA = (
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
)
# Bound on ||T - I||_1 for a degree-7 Pade log(I + X) at unit roundoff.
_LOG_THETA7 = 0.25
_LOG_DEGREE = 7
_MAX_SQRTS = 100


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    determinant: float


def as_square(A, name="matrix"):
    """Return ``A`` as a finite float64 square array, validating shape."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty square matrix, "
                         f"got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def spectrum(A):
    A = as_square(A)
    return Spectrum(eigenvalues=np.linalg.eigvals(A),
                    determinant=float(np.linalg.det(A)))


def check_nonsingular(A):
    """Raise SingularMatrix when |det A| < 1e-12 * max|A_ij| ** dim."""
    A = as_square(A)
    n = A.shape[0]
    scale = np.max(np.abs(A))
    det = np.linalg.det(A)
    if scale == 0.0 or abs(det) < SINGULAR_RTOL * scale ** n:
        raise SingularMatrix(
            f"|det| = {abs(det):.3e} below threshold "
            f"{SINGULAR_RTOL * scale ** n:.3e}")
    return det


def regularize(A, eps=REGULARIZATION_EPS):
    """Shift ``A`` by ``eps * I``; the escape hatch for near-singular iterates."""
    A = as_square(A)
    return A + eps * np.eye(A.shape[0])


# -- exponential ------------------------------------------------------------

def _pade_exp(A, m):
    b = _PADE_COEFFS[m]
    n = A.shape[0]
    ident = np.eye(n)
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A2 @ A4
        U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
                 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
        V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
             + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    else:
        powers = [ident, A2]
        for _ in range(2, (m + 1) // 2):
            powers.append(powers[-1] @ A2)
        U = sum(b[j] * powers[j // 2] for j in range(m, 0, -2))
        U = A @ U
        V = sum(b[j] * powers[j // 2] for j in range(m - 1, -1, -2))
    return np.linalg.solve(V - U, V + U)


def mat_exp(A):
    """Matrix exponential by scaling and squaring.

    The Pade degree is the smallest of 3, 5, 7, 9, 13 whose backward error
    bound covers ``||A||_1``; beyond the degree-13 bound the matrix is
    scaled by ``2**-s`` and the result squared ``s`` times.
    """
    A = as_square(A)
    norm1 = np.linalg.norm(A, 1)
    for m, theta in _EXP_THETA[:-1]:
        if norm1 <= theta:
            return _pade_exp(A, m)
    theta13 = _EXP_THETA[-1][1]
    s = 0
    if norm1 > theta13:
        s = max(0, int(np.ceil(np.log2(norm1 / theta13))))
    F = _pade_exp(A / 2.0 ** s, 13)
    for _ in range(s):
        F = F @ F
    return F


# -- logarithm --------------------------------------------------------------

_CUT_RTOL = 64 * np.finfo(float).eps


def _schur_blocks(T):
    """Diagonal block boundaries of a real quasi-upper-triangular matrix."""
    n = T.shape[0]
    blocks = []
    i = 0
    while i < n:
        if i + 1 < n and T[i + 1, i] != 0.0:
            blocks.append((i, i + 2))
            i += 2
        else:
            blocks.append((i, i + 1))
            i += 1
    return blocks


def _sqrt_block(B):
    if B.shape[0] == 1:
        return np.sqrt(B)
    # 2x2 block with eigenvalues theta +- i mu, mu != 0.
    theta = 0.5 * (B[0, 0] + B[1, 1])
    modulus = np.sqrt(abs(np.linalg.det(B)))
    alpha = np.sqrt(0.5 * (theta + modulus))
    return alpha * np.eye(2) + (B - theta * np.eye(2)) / (2.0 * alpha)


def _sqrtm_quasi_triangular(T, blocks):
    """Principal square root of a real quasi-triangular matrix.

    Block column recurrence: diagonal blocks in closed form, off-diagonal
    blocks from the small Sylvester equations
    ``R_ii X + X R_jj = T_ij - sum_k R_ik R_kj``.
    """
    R = np.zeros_like(T)
    for (a, b) in blocks:
        R[a:b, a:b] = _sqrt_block(T[a:b, a:b])
    nb = len(blocks)
    for jb in range(1, nb):
        c0, c1 = blocks[jb]
        Rjj = R[c0:c1, c0:c1]
        for ib in range(jb - 1, -1, -1):
            r0, r1 = blocks[ib]
            rhs = T[r0:r1, c0:c1].copy()
            if r1 < c0:
                rhs -= R[r0:r1, r1:c0] @ R[r1:c0, c0:c1]
            Rii = R[r0:r1, r0:r1]
            p, q = r1 - r0, c1 - c0
            # vec(Rii X + X Rjj) = (I_q kron Rii + Rjj^T kron I_p) vec(X)
            K = np.kron(np.eye(q), Rii) + np.kron(Rjj.T, np.eye(p))
            x = np.linalg.solve(K, rhs.reshape(-1, order="F"))
            R[r0:r1, c0:c1] = x.reshape((p, q), order="F")
    return R


def _log1p_pade(X, m):
    # log(I + X) = int_0^1 X (I + tX)^-1 dt, Gauss-Legendre with m nodes
    # coincides with the [m/m] Pade approximant.
    nodes, weights = np.polynomial.legendre.leggauss(m)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    ident = np.eye(X.shape[0])
    out = np.zeros_like(X)
    for t, w in zip(nodes, weights):
        out += w * np.linalg.solve((ident + t * X).T, X.T).T
    return out


def mat_log(A):
    """Principal matrix logarithm of a real matrix.

    Raises
    ------
    SingularMatrix
        If ``|det A|`` is below the relative singularity threshold.
    NonPrincipalLog
        If ``A`` has a real eigenvalue on the closed negative axis.
    """
    A = as_square(A)
    check_nonsingular(A)
    n = A.shape[0]
    T, Q = scipy.linalg.schur(A, output="real")
    blocks = _schur_blocks(T)
    for (a, b) in blocks:
        if b - a == 1 and T[a, a] <= 0.0:
            raise NonPrincipalLog(
                f"real eigenvalue {T[a, a]:.6g} on the closed negative axis")
        if b - a == 2:
            B = T[a:b, a:b]
            theta = 0.5 * np.trace(B)
            modulus = np.sqrt(abs(np.linalg.det(B)))
            # a conjugate pair within rounding of the negative axis
            if theta < 0 and theta + modulus <= _CUT_RTOL * modulus:
                raise NonPrincipalLog(
                    "complex eigenvalue pair on the negative real axis")
    ident = np.eye(n)
    s = 0
    while np.linalg.norm(T - ident, 1) > _LOG_THETA7:
        if s >= _MAX_SQRTS:
            raise NonPrincipalLog("square-root iteration did not converge")
        T = _sqrtm_quasi_triangular(T, blocks)
        s += 1
    L = _log1p_pade(T - ident, _LOG_DEGREE)
    return Q @ (2.0 ** s * L) @ Q.T


# -- GL+ projection and geodesics -------------------------------------------

def project_to_glplus(A):
    """Map ``A`` into GL+ by flipping the sign of one real eigenvalue.

    Matrices that already have positive determinant come back unchanged.
    Otherwise the negative real eigenvalue of smallest magnitude is negated
    through a rank-one spectral update, leaving the rest of the spectrum
    intact.
    """
    A = as_square(A)
    det = check_nonsingular(A)
    if det > 0:
        return A.copy()
    w, V = np.linalg.eig(A)
    if np.linalg.cond(V) > CONDITION_LIMIT:
        raise DefectiveMatrix("eigenvector basis condition number exceeds "
                              f"{CONDITION_LIMIT:.0e}")
    scale = np.max(np.abs(w))
    real = np.abs(w.imag) <= 1e-12 * scale
    candidates = np.flatnonzero(real & (w.real < 0))
    if candidates.size == 0:
        # det < 0 forces an odd count of negative real eigenvalues.
        raise DefectiveMatrix("no negative real eigenvalue resolved")
    j = candidates[np.argmin(np.abs(w.real[candidates]))]
    lam = w[j].real
    right = V[:, j]
    left = np.linalg.inv(V)[j, :]
    return A - (2.0 * lam * np.outer(right, left)).real


def geodesic_interp(a, b, t):
    """Constant-speed group path ``exp(t log(b a^-1)) a`` from a to b."""
    a = as_square(a, "a")
    b = as_square(b, "b")
    if a.shape != b.shape:
        raise ValueError("a and b must have equal shape")
    check_nonsingular(a)
    d = np.linalg.solve(a.T, b.T).T
    return mat_exp(t * mat_log(d)) @ a
