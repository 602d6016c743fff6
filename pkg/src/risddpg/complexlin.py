"""Small dense complex linear algebra helpers.

Matrices are plain ``numpy`` arrays of dtype ``complex128`` (row-major). The
helpers add the shape checks and the handful of operations the simulator
needs; everything else goes through numpy directly.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when operand dimensions do not agree."""


def as_matrix(a) -> np.ndarray:
    """Coerce ``a`` to a 2-D complex128 array (vectors become single rows)."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim == 0:
        return m.reshape(1, 1)
    if m.ndim == 1:
        return m.reshape(1, -1)
    if m.ndim != 2:
        raise ShapeError(f"expected a matrix, got an array with shape {m.shape}")
    return m


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.complex128)


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def hermitian(a) -> np.ndarray:
    """Conjugate transpose."""
    return as_matrix(a).conj().T


def frobenius_norm(a) -> float:
    """sqrt of the sum of squared entry moduli."""
    m = np.asarray(a, dtype=np.complex128)
    return float(np.sqrt(np.sum(m.real**2 + m.imag**2)))


def trace_gram(a) -> float:
    """tr(A A^H), i.e. the total power of a precoding matrix."""
    m = np.asarray(a, dtype=np.complex128)
    return float(np.sum(m.real**2 + m.imag**2))


def pinv(a, rcond: float = 1e-12) -> np.ndarray:
    """Moore-Penrose pseudo-inverse (used by the zero-forcing baseline)."""
    return np.linalg.pinv(as_matrix(a), rcond=rcond)


def condition_number(a) -> float:
    s = np.linalg.svd(as_matrix(a), compute_uv=False)
    if s.size == 0 or s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])
