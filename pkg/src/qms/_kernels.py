"""Divided-difference kernels on pairs of eigenvalues.

All kernels switch to their analytic limit when the two arguments agree to
``1e-12`` relative, which avoids cancellation in ``(a - b) / (g(a) - g(b))``.
"""

import numpy as np

COINCIDENCE_RTOL = 1e-12


def _close(a, b):
    scale = np.maximum(np.abs(a), np.abs(b))
    return np.abs(a - b) <= COINCIDENCE_RTOL * scale


def logmean(a, b):
    """Logarithmic mean ``(a - b) / (log a - log b)``; zero if either argument is zero."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    out = np.zeros(a.shape)
    pos = (a > 0) & (b > 0)
    near = pos & _close(a, b)
    far = pos & ~near
    d = a[far] - b[far]
    out[far] = d / np.log1p(d / b[far])
    out[near] = (a[near] + b[near]) / 2
    return out


def log_divided_difference(a, b):
    """``(log a - log b) / (a - b)`` for positive arguments, limit ``1/a``."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("log divided difference needs positive arguments")
    out = np.empty(a.shape)
    near = _close(a, b)
    d = a[~near] - b[~near]
    out[~near] = np.log1p(d / b[~near]) / d
    out[near] = 2.0 / (a[near] + b[near])
    return out


def power_divided_difference(a, b, p):
    """``(a**p - b**p) / (a - b)``, limit ``p * a**(p-1)``."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    out = np.empty(a.shape)
    near = _close(a, b)
    d = a[~near] - b[~near]
    out[~near] = (a[~near] ** p - b[~near] ** p) / d
    mid = (a[near] + b[near]) / 2
    out[near] = p * mid ** (p - 1) if p != 0 else 0.0
    return out


def frame_multiplier(U_row, U_col, weights, K):
    """Apply ``K -> U_row (w * (U_row^* K U_col)) U_col^*``."""
    Kt = U_row.conj().T @ K @ U_col
    return U_row @ (weights * Kt) @ U_col.conj().T


def frame_superop(U_row, U_col, weights):
    """Superoperator of :func:`frame_multiplier` (column-stacking)."""
    # vec(U_row^* K U_col) = kron(U_col^T, U_row^*) vec(K)
    to_frame = np.kron(U_col.T, U_row.conj().T)
    from_frame = np.kron(U_col.conj(), U_row)
    return from_frame @ (weights.reshape(-1, order="F")[:, None] * to_frame)
