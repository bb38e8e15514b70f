"""Dense linear algebra helpers and scalar special functions.

Matrices and vectors are plain float64 numpy arrays. The helpers here add the
shape checks the rest of the package relies on and pin down a few conventions
(zero-norm cosine, empty-vector norm).
"""

import math

import numpy as np

# below this norm a vector is treated as zero in cosine_similarity
COSINE_NORM_FLOOR = 1e-300


class ShapeError(ValueError):
    """Raised when operand dimensions are incompatible."""


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def as_vector(v) -> np.ndarray:
    x = np.asarray(v, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"expected a 1-D vector, got shape {x.shape}")
    return x


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def hadamard(a, b) -> np.ndarray:
    a = as_vector(a)
    b = as_vector(b)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.size} vs {b.size}")
    return a * b


def l2_norm(v) -> float:
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size == 0:
        return 0.0
    return float(np.sqrt(np.dot(v, v)))


def cosine_similarity(u, v) -> float:
    """Cosine of the angle between two flat vectors.

    Returns 0.0 when either vector has (numerically) zero length, so objectives
    built on it stay finite when a gradient vanishes.
    """
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ShapeError(f"length mismatch: {u.size} vs {v.size}")
    nu = l2_norm(u)
    nv = l2_norm(v)
    if nu < COSINE_NORM_FLOOR or nv < COSINE_NORM_FLOOR:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def erf(x: float) -> float:
    return math.erf(x)


def erfc(x: float) -> float:
    return math.erfc(x)
