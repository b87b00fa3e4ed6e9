"""Completely positive maps: Kraus and characteristic-matrix representations,
positivity tests, partial trace and data-processing checks.

A :class:`QuantumChannel` stores one Kraus family ``V_j`` of shape
``n_out x n_in``.  The two maps it determines are

* trace preserving (Schroedinger picture): ``X -> sum V_j X V_j^*``, ``M_{n_in} -> M_{n_out}``
* unital (Heisenberg picture): ``Y -> sum V_j^* Y V_j``, ``M_{n_out} -> M_{n_in}``

and both are normalized by the same closure ``sum V_j^* V_j = I``.
``orientation`` records which of the two ``apply`` evaluates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .entropy import relative_entropy
from .errors import BasisNotOrthonormal, InvalidInput, KernelConditionViolated, NotUnital, ShapeMismatch
from .matcore import (
    apply_superop,
    ginibre,
    matrix_from_json,
    matrix_to_json,
    pseudo_inverse,
    superop_from_map,
    superop_lr,
)

CLOSURE_TOL = 1e-9
CP_TOL = 1e-9
ORIENTATIONS = ("unital", "trace_preserving")


@dataclass(frozen=True)
class QuantumChannel:
    n_in: int
    n_out: int
    kraus: tuple
    orientation: str = "trace_preserving"
    normalized: bool = True

    def __init__(self, n_in, n_out, kraus, orientation="trace_preserving", normalized=True):
        if orientation not in ORIENTATIONS:
            raise InvalidInput(f"orientation must be one of {ORIENTATIONS}")
        ops = tuple(np.array(V, dtype=complex) for V in kraus)
        if not ops:
            raise InvalidInput("empty Kraus family")
        for V in ops:
            if V.shape != (n_out, n_in):
                raise ShapeMismatch(f"Kraus operator has shape {V.shape}, expected {(n_out, n_in)}")
            V.setflags(write=False)
        object.__setattr__(self, "n_in", int(n_in))
        object.__setattr__(self, "n_out", int(n_out))
        object.__setattr__(self, "kraus", ops)
        object.__setattr__(self, "orientation", orientation)
        object.__setattr__(self, "normalized", bool(normalized))
        if normalized:
            err = closure_error(ops)
            if err > CLOSURE_TOL:
                raise InvalidInput(f"Kraus family violates sum V*V = I by {err:.2e}")

    @property
    def dim_in(self) -> int:
        """Dimension of the matrices ``apply`` accepts."""
        return self.n_in if self.orientation == "trace_preserving" else self.n_out

    @property
    def dim_out(self) -> int:
        return self.n_out if self.orientation == "trace_preserving" else self.n_in

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=complex)
        if X.shape != (self.dim_in, self.dim_in):
            raise ShapeMismatch(f"channel expects {self.dim_in}x{self.dim_in} input, got {X.shape}")
        if self.orientation == "trace_preserving":
            return sum(V @ X @ V.conj().T for V in self.kraus)
        return sum(V.conj().T @ X @ V for V in self.kraus)

    __call__ = apply

    def adjoint(self) -> "QuantumChannel":
        other = "unital" if self.orientation == "trace_preserving" else "trace_preserving"
        return QuantumChannel(self.n_in, self.n_out, self.kraus, other, self.normalized)

    def superop(self) -> np.ndarray:
        """Matrix of ``apply`` in the column-stacking convention."""
        if self.orientation == "trace_preserving":
            return sum(superop_lr(V, V.conj().T) for V in self.kraus)
        return sum(superop_lr(V.conj().T, V) for V in self.kraus)

    def to_json(self) -> dict:
        return {
            "n_in": self.n_in,
            "n_out": self.n_out,
            "orientation": self.orientation,
            "kraus": [_rect_to_json(V) for V in self.kraus],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "QuantumChannel":
        try:
            n_in, n_out = int(obj["n_in"]), int(obj["n_out"])
            kraus = [_rect_from_json(k) for k in obj["kraus"]]
            orientation = obj.get("orientation", "trace_preserving")
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed channel JSON: {exc}") from exc
        return cls(n_in, n_out, kraus, orientation)


def _rect_to_json(V) -> dict:
    V = np.asarray(V, dtype=complex)
    if V.shape[0] == V.shape[1]:
        return matrix_to_json(V)
    return {"rows": V.shape[0], "cols": V.shape[1], "re": V.real.tolist(), "im": V.imag.tolist()}


def _rect_from_json(obj: dict) -> np.ndarray:
    if "n" in obj:
        return matrix_from_json(obj)
    return np.asarray(obj["re"], float) + 1j * np.asarray(obj["im"], float)


def closure_error(kraus) -> float:
    S = sum(V.conj().T @ V for V in kraus)
    return float(np.max(np.abs(S - np.eye(S.shape[0]))))


def identity_channel(n: int, orientation="trace_preserving") -> QuantumChannel:
    return QuantumChannel(n, n, [np.eye(n)], orientation)


def unitary_channel(U, orientation="trace_preserving") -> QuantumChannel:
    U = np.asarray(U, dtype=complex)
    return QuantumChannel(U.shape[1], U.shape[0], [U], orientation)


def trace_channel(n: int) -> QuantumChannel:
    """Full trace ``M_n -> M_1``."""
    kraus = [np.eye(n)[i : i + 1, :] for i in range(n)]
    return QuantumChannel(n, 1, kraus, "trace_preserving")


def partial_trace_channel(m: int, n: int) -> QuantumChannel:
    """Trace over the first (block-index) factor of ``C^m (x) C^n``."""
    kraus = []
    for i in range(m):
        V = np.zeros((n, m * n))
        V[:, i * n : (i + 1) * n] = np.eye(n)
        kraus.append(V)
    return QuantumChannel(m * n, n, kraus, "trace_preserving")


def _as_superop(phi) -> np.ndarray:
    if isinstance(phi, QuantumChannel):
        if phi.dim_in != phi.dim_out:
            raise ShapeMismatch("characteristic matrices need a map of M_n into itself")
        return phi.superop()
    S = np.asarray(phi, dtype=complex)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ShapeMismatch(f"superoperator must be square, got {S.shape}")
    n = int(round(np.sqrt(S.shape[0])))
    if n * n != S.shape[0]:
        raise ShapeMismatch("superoperator size is not a perfect square")
    return S


def transpose_map(n: int) -> np.ndarray:
    return superop_from_map(lambda X: X.T, n)


def choi_map(n: int = 2) -> np.ndarray:
    """Choi's unital positive map ``X -> X^T/2 + Tr[X] I/(2n)`` (``1/4`` on M_2)."""
    return superop_from_map(lambda X: X.T / 2 + np.trace(X) * np.eye(n) / (2 * n), n)


# -- bases and characteristic matrices --------------------------------------


def matrix_unit_basis(n: int, U=None) -> np.ndarray:
    """``F_(i,j) = sqrt(n) |u_i><u_j|``, flattened with index ``i*n + j``."""
    U = np.eye(n, dtype=complex) if U is None else np.asarray(U, dtype=complex)
    return np.sqrt(n) * np.einsum("ai,bj->ijab", U, U.conj()).reshape(n * n, n, n)


def gell_mann(n: int) -> list[np.ndarray]:
    """Generalized Gell-Mann matrices, ``Tr[g_a g_b] = 2 delta_ab``."""
    mats = []
    for j in range(n):
        for k in range(j + 1, n):
            S = np.zeros((n, n), complex)
            S[j, k] = S[k, j] = 1
            A = np.zeros((n, n), complex)
            A[j, k] = -1j
            A[k, j] = 1j
            mats += [S, A]
    for ell in range(1, n):
        D = np.zeros((n, n), complex)
        D[np.arange(ell), np.arange(ell)] = 1
        D[ell, ell] = -ell
        mats.append(D * np.sqrt(2 / (ell * (ell + 1))))
    return mats


def hermitian_unital_basis(n: int) -> np.ndarray:
    """Orthonormal basis for the normalized HS product, identity first, all Hermitian."""
    return np.array([np.eye(n, dtype=complex)] + [np.sqrt(n / 2) * g for g in gell_mann(n)])


def check_orthonormal(basis, tol: float = 1e-9) -> None:
    basis = np.asarray(basis)
    n = basis.shape[1]
    if basis.shape != (n * n, n, n):
        raise BasisNotOrthonormal(f"basis must hold n^2 = {n * n} matrices of size {n}")
    G = np.einsum("aij,bij->ab", basis.conj(), basis) / n
    err = np.max(np.abs(G - np.eye(n * n)))
    if err > tol:
        raise BasisNotOrthonormal(f"basis Gram matrix deviates from identity by {err:.2e}")


class CharacteristicMatrix(NamedTuple):
    basis: np.ndarray
    matrix: np.ndarray

    def superop(self) -> np.ndarray:
        """Rebuild ``sum c_ab #(F_a^* (x) F_b)``."""
        F = self.basis
        n = F.shape[1]
        # S4[i,j,k,l] = sum_ab c_ab conj(F_a)[k,i] F_b[l,j]
        S4 = np.einsum("ab,aki,blj->ijkl", self.matrix, F.conj(), F)
        return S4.reshape(n * n, n * n, order="F")

    def kraus(self, tol: float = 0.0) -> list[np.ndarray]:
        """Kraus family ``V_g`` with ``Phi(X) = sum V_g^* X V_g`` from the eigensystem."""
        w, U = np.linalg.eigh((self.matrix + self.matrix.conj().T) / 2)
        out = []
        for lam, u in zip(w, U.T):
            if lam > tol:
                out.append(np.sqrt(lam) * np.einsum("b,bij->ij", u.conj(), self.basis))
        return out


def characteristic_matrix(phi, basis=None) -> CharacteristicMatrix:
    """Coefficients of ``Phi = sum_ab c_ab #(F_a^* (x) F_b)`` in an orthonormal basis."""
    S = _as_superop(phi)
    n = int(round(np.sqrt(S.shape[0])))
    F = hermitian_unital_basis(n) if basis is None else np.asarray(basis, dtype=complex)
    check_orthonormal(F)
    S4 = S.reshape(n, n, n, n, order="F")
    C = np.einsum("aki,blj,ijkl->ab", F, F.conj(), S4) / n**2
    return CharacteristicMatrix(F, C)


class CPResult(NamedTuple):
    is_cp: bool
    min_eigenvalue: float
    kraus: list | None


def is_completely_positive(phi, basis=None) -> CPResult:
    """CP test through the spectrum of the characteristic matrix."""
    cm = characteristic_matrix(phi, basis)
    H = (cm.matrix + cm.matrix.conj().T) / 2
    lam_min = float(np.linalg.eigvalsh(H)[0])
    ok = lam_min >= -CP_TOL
    kraus = cm.kraus(tol=CP_TOL * max(1.0, float(np.max(np.abs(H))))) if ok else None
    return CPResult(ok, lam_min, kraus)


def is_unital(phi, tol: float = CLOSURE_TOL) -> bool:
    S = _as_superop(phi)
    n = int(round(np.sqrt(S.shape[0])))
    return bool(np.max(np.abs(apply_superop(S, np.eye(n)) - np.eye(n))) <= tol)


def is_schwarz_sampled(phi, trials: int = 1000, seed=None) -> tuple[bool, float]:
    """Sampled check of ``Phi(K^*K) >= Phi(K)^* Phi(K)`` for a unital map.

    This is a necessary-condition test only.  Returns ``(passed, worst_min_eig)``.
    """
    S = _as_superop(phi)
    n = int(round(np.sqrt(S.shape[0])))
    if not is_unital(S):
        raise NotUnital("Schwarz inequality is tested on unital maps only")
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(trials):
        K = ginibre((n, n), rng)
        PK = apply_superop(S, K)
        D = apply_superop(S, K.conj().T @ K) - PK.conj().T @ PK
        worst = min(worst, float(np.linalg.eigvalsh((D + D.conj().T) / 2)[0]))
    return worst >= -CP_TOL, worst


def partial_trace(X, block_dims: tuple[int, int]) -> np.ndarray:
    """Sum of the diagonal ``n x n`` blocks of an ``mn x mn`` matrix."""
    m, n = block_dims
    X = np.asarray(X)
    if X.shape != (m * n, m * n):
        raise ShapeMismatch(f"expected a {m * n}x{m * n} matrix, got {X.shape}")
    return np.einsum("iaib->ab", X.reshape(m, n, m, n))


class DPIResult(NamedTuple):
    lhs: float
    rhs: float
    slack: float
    passed: bool


def _require_tp(channel: QuantumChannel) -> None:
    if channel.orientation != "trace_preserving" or not channel.normalized:
        raise InvalidInput("expected a trace-preserving channel")


def dpi_check(channel: QuantumChannel, rho, sigma, tol: float = 1e-9) -> DPIResult:
    """Compare ``D(Phi(rho)||Phi(sigma))`` with ``D(rho||sigma)``."""
    _require_tp(channel)
    lhs = relative_entropy(channel.apply(rho), channel.apply(sigma))
    rhs = relative_entropy(rho, sigma)
    slack = rhs - lhs if np.isfinite(rhs) or np.isfinite(lhs) else 0.0
    return DPIResult(lhs, rhs, slack, bool(slack >= -tol))


def kernel_included(X, K, tol: float = 1e-8) -> bool:
    """``ker X  subset ker K^*`` via ``|K^*(I - X X^+)| <= tol |K|``."""
    X = np.asarray(X, dtype=complex)
    K = np.asarray(K, dtype=complex)
    P = np.eye(X.shape[0]) - X @ pseudo_inverse(X)
    return bool(np.linalg.norm(K.conj().T @ P, 2) <= tol * max(np.linalg.norm(K, 2), 1e-300))


def tracial_lr_check(channel: QuantumChannel, K, X) -> float:
    """Slack of ``Tr[K^* X^+ K] >= Tr[Phi(K)^* Phi(X)^+ Phi(K)]`` for a TP channel."""
    _require_tp(channel)
    if not kernel_included(X, K):
        raise KernelConditionViolated("ker(X) is not contained in ker(K^*)")
    K = np.asarray(K, dtype=complex)
    rhs = np.trace(K.conj().T @ pseudo_inverse(X) @ K).real
    PK = channel.apply(K)
    lhs = np.trace(PK.conj().T @ pseudo_inverse(channel.apply(X)) @ PK).real
    return float(rhs - lhs)
