"""Dense Hermitian linear algebra, spectral calculus and vectorization.

Vectorization is column stacking throughout: ``vec(A @ X @ B) ==
kron(B.T, A) @ vec(X)``.  A superoperator is stored as the ``n**2 x n**2``
matrix acting on ``vec(X)``.  Because ``vec`` is an isometry for the
unnormalized Hilbert-Schmidt product ``Tr[A^* B]``, the Hilbert-Schmidt
adjoint of a superoperator is simply its conjugate transpose.
"""

from __future__ import annotations

from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidInput, ShapeMismatch, SingularMatrix

HERMITIAN_REJECT_TOL = 1e-8
DENSITY_EIG_TOL = 1e-12
DENSITY_TRACE_TOL = 1e-12
STRICT_EIG_TOL = 1e-10
DEGENERACY_RTOL = 1e-9


class Eigensystem(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


def _as_square(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput("matrix has non-finite entries")
    return A


def hermitian(A, tol: float = HERMITIAN_REJECT_TOL) -> np.ndarray:
    """Return ``(A + A^*)/2`` after checking that ``A`` is Hermitian to ``tol``.

    The tolerance is relative to ``max(1, |A|_max)``.
    """
    A = _as_square(A)
    scale = max(1.0, float(np.max(np.abs(A))) if A.size else 1.0)
    if np.max(np.abs(A - A.conj().T), initial=0.0) > tol * scale:
        raise InvalidInput("matrix is not Hermitian")
    return (A + A.conj().T) / 2


def density(A, strict: bool = False) -> np.ndarray:
    """Validate a density matrix and return its symmetrized form.

    With ``strict=True`` the state must also be invertible (smallest
    eigenvalue above 1e-10).
    """
    rho = hermitian(A)
    evals = np.linalg.eigvalsh(rho)
    if evals[0] < -DENSITY_EIG_TOL:
        raise InvalidInput(f"density matrix has negative eigenvalue {evals[0]:.3e}")
    if abs(np.trace(rho).real - 1.0) > DENSITY_TRACE_TOL * max(1, rho.shape[0]):
        raise InvalidInput(f"density matrix has trace {np.trace(rho).real!r}")
    if strict and evals[0] <= STRICT_EIG_TOL:
        raise SingularMatrix(f"state is not strictly positive (min eigenvalue {evals[0]:.3e})")
    return rho


def is_strict(rho, tol: float = STRICT_EIG_TOL) -> bool:
    return bool(np.linalg.eigvalsh(hermitian(rho))[0] > tol)


def eigh(A) -> Eigensystem:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    A = hermitian(A)
    w, U = np.linalg.eigh(A)
    return Eigensystem(w, U)


def from_eigen(values, vectors) -> np.ndarray:
    return (vectors * values) @ vectors.conj().T


def matrix_function(
    A,
    f: Callable[[np.ndarray], np.ndarray],
    zero_extension: bool = False,
    zero_tol: float | None = None,
) -> np.ndarray:
    """Apply the scalar function ``f`` to a Hermitian matrix via its spectrum.

    With ``zero_extension`` the eigenvalues that vanish (to ``zero_tol``,
    default ``1e-10 * max|lambda|``) are sent to 0 instead of ``f(0)``.
    Raises SingularMatrix when ``f`` is not finite on the (remaining) spectrum.
    """
    w, U = eigh(A)
    if zero_tol is None:
        zero_tol = 1e-10 * max(1.0, float(np.max(np.abs(w))))
    zero = np.abs(w) <= zero_tol if zero_extension else np.zeros(w.shape, bool)
    fw = np.zeros_like(w)
    with np.errstate(divide="ignore", invalid="ignore"):
        fw[~zero] = f(w[~zero])
    if not np.all(np.isfinite(fw)):
        raise SingularMatrix("function is not finite on the spectrum")
    return from_eigen(fw, U)


def _positive_spectrum(A, name: str) -> Eigensystem:
    w, U = eigh(A)
    if w[0] <= 0:
        raise SingularMatrix(f"{name} requires a strictly positive matrix (min eigenvalue {w[0]:.3e})")
    return Eigensystem(w, U)


def logm_h(A) -> np.ndarray:
    """Matrix logarithm of a strictly positive Hermitian matrix."""
    w, U = _positive_spectrum(A, "log")
    return from_eigen(np.log(w), U)


def powm_h(A, p: float) -> np.ndarray:
    """``A**p`` for PSD ``A``; negative powers need strict positivity."""
    if p < 0:
        w, U = _positive_spectrum(A, "negative power")
        return from_eigen(w**p, U)
    w, U = eigh(A)
    return from_eigen(np.clip(w, 0.0, None) ** p, U)


def sqrtm_h(A) -> np.ndarray:
    return powm_h(A, 0.5)


def pseudo_inverse(A, rank_tol: float | None = None) -> np.ndarray:
    """Moore-Penrose inverse of a Hermitian PSD matrix by spectral cut-off."""
    w, U = eigh(A)
    if rank_tol is None:
        rank_tol = 1e-10 * max(float(np.max(np.abs(w), initial=0.0)), np.finfo(float).tiny)
    keep = np.abs(w) > rank_tol
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    return from_eigen(inv, U)


def group_degenerate(values: Sequence[float], rtol: float = DEGENERACY_RTOL) -> list[list[int]]:
    """Cluster indices of (sorted or unsorted) real values with relative gap ``rtol``."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values)
    groups: list[list[int]] = []
    for idx in order:
        if groups:
            ref = values[groups[-1][-1]]
            if abs(values[idx] - ref) <= rtol * max(abs(values[idx]), abs(ref), 1e-300):
                groups[-1].append(int(idx))
                continue
        groups.append([int(idx)])
    return groups


# -- vectorization --------------------------------------------------------


def vec(X) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(X).reshape(-1, order="F")


def unvec(v, shape: tuple[int, int] | None = None) -> np.ndarray:
    v = np.asarray(v)
    if shape is None:
        n = int(round(np.sqrt(v.size)))
        if n * n != v.size:
            raise ShapeMismatch(f"cannot unvec a vector of length {v.size} into a square matrix")
        shape = (n, n)
    return v.reshape(shape, order="F")


def superop_lr(A, B) -> np.ndarray:
    """Superoperator of ``X -> A @ X @ B``."""
    return np.kron(np.asarray(B).T, np.asarray(A))


def left_mul(A) -> np.ndarray:
    A = np.asarray(A)
    return superop_lr(A, np.eye(A.shape[1]))


def right_mul(B) -> np.ndarray:
    B = np.asarray(B)
    return superop_lr(np.eye(B.shape[0]), B)


def commutator_superop(V) -> np.ndarray:
    """Superoperator of ``X -> [V, X]``."""
    return left_mul(V) - right_mul(V)


def apply_superop(S, X) -> np.ndarray:
    X = np.asarray(X)
    out = np.asarray(S) @ vec(X)
    m = int(round(np.sqrt(out.size)))
    return unvec(out, (m, m))


def superop_from_map(fn: Callable[[np.ndarray], np.ndarray], n_in: int, n_out: int | None = None) -> np.ndarray:
    """Matrix of a linear map ``M_{n_in} -> M_{n_out}`` by probing matrix units."""
    n_out = n_in if n_out is None else n_out
    S = np.zeros((n_out * n_out, n_in * n_in), dtype=complex)
    for col in range(n_in * n_in):
        E = np.zeros(n_in * n_in, dtype=complex)
        E[col] = 1.0
        S[:, col] = vec(fn(unvec(E, (n_in, n_in))))
    return S


def hs_inner(A, B) -> complex:
    """Unnormalized Hilbert-Schmidt product ``Tr[A^* B]``."""
    return complex(np.vdot(np.asarray(A), np.asarray(B)))


def dagger(A) -> np.ndarray:
    return np.asarray(A).conj().T


def comm(A, B) -> np.ndarray:
    return A @ B - B @ A


# -- random instances -----------------------------------------------------


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def ginibre(shape, seed=None) -> np.ndarray:
    """I.i.d. standard complex Gaussian entries (unit variance)."""
    rng = _rng(seed)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_hermitian(n: int, seed=None) -> np.ndarray:
    G = ginibre((n, n), seed)
    return (G + G.conj().T) / 2


def random_unitary(n: int, seed=None) -> np.ndarray:
    Q, R = np.linalg.qr(ginibre((n, n), seed))
    phases = np.diag(R) / np.abs(np.diag(R))
    return Q * phases


def random_density(n: int, strict: bool = False, seed=None, eps: float = 1e-3) -> np.ndarray:
    """Ginibre random state ``G G^* / Tr[G G^*]``.

    ``strict`` mixes in ``eps * I/n`` so the state is invertible.
    """
    if n < 1:
        raise InvalidInput("dimension must be positive")
    G = ginibre((n, n), seed)
    rho = G @ G.conj().T
    rho /= np.trace(rho).real
    if strict:
        rho = (1 - eps) * rho + eps * np.eye(n) / n
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


def random_cptp(n_in: int, n_out: int, n_kraus: int, seed=None):
    """Random channel from whitened Gaussian Kraus operators.

    Returns a trace-preserving :class:`~qms.channels.QuantumChannel` whose
    Kraus family ``V_j`` (``n_out x n_in``) satisfies ``sum V_j^* V_j = I``.
    """
    from .channels import QuantumChannel

    if n_kraus < 1:
        raise InvalidInput("need at least one Kraus operator")
    if n_kraus * n_out < n_in:
        raise InvalidInput("a trace-preserving channel needs n_kraus * n_out >= n_in")
    G = ginibre((n_kraus, n_out, n_in), seed)
    S = np.einsum("kji,kjl->il", G.conj(), G)
    w, U = np.linalg.eigh((S + S.conj().T) / 2)
    S_inv_half = (U * w**-0.5) @ U.conj().T
    kraus = [g @ S_inv_half for g in G]
    return QuantumChannel(n_in, n_out, kraus, "trace_preserving")


# -- JSON -----------------------------------------------------------------


def matrix_to_json(A) -> dict:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeMismatch("JSON matrix format holds square matrices only")
    return {"n": int(A.shape[0]), "re": A.real.tolist(), "im": A.imag.tolist()}


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        n = int(obj["n"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros((n, n))), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed matrix JSON: {exc}") from exc
    if re.shape != (n, n) or im.shape != (n, n):
        raise ShapeMismatch(f"matrix JSON declares n={n} but has shapes {re.shape}, {im.shape}")
    A = re + 1j * im
    if not np.all(np.isfinite(A)):
        raise InvalidInput("matrix JSON has non-finite entries")
    return A
