"""Lindblad generators: GKS assembly and recognition, GNS detailed balance,
the Alicki decomposition into eigen-jumps, ergodicity and the semigroup.

Generators are stored in the Heisenberg picture as superoperators ``L``
(column stacking); the Schroedinger generator is ``L.conj().T``.

A detailed-balance generator is described by a stationary state ``sigma``
and jumps ``(V_j, omega_j)`` with ``sigma V_j sigma^-1 = e^(-omega_j) V_j``:

    L(A) = sum_j e^(-omega_j/2) (V_j^* [A, V_j] + [V_j^*, A] V_j)

All scale is folded into ``V_j``; the weight ``e^(-omega_j/2)`` stays explicit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm, null_space

from . import _kernels
from .channels import QuantumChannel, characteristic_matrix, hermitian_unital_basis, is_completely_positive
from .errors import (
    BlockLeakage,
    InvalidInput,
    NotCP,
    NotDetailedBalance,
    NotUnitalGenerator,
    ShapeMismatch,
    SingularMatrix,
)
from .matcore import (
    commutator_superop,
    density,
    eigh,
    ginibre,
    hermitian,
    left_mul,
    matrix_from_json,
    matrix_to_json,
    random_density,
    right_mul,
    superop_lr,
    unvec,
    vec,
)

GEN_TOL = 1e-9
DB_TOL = 1e-9
JUMP_TOL = 1e-8
BOHR_ATOL = 1e-9
ERGODIC_RTOL = 1e-9


def _n_of(S) -> int:
    n = int(round(np.sqrt(S.shape[0])))
    if S.shape != (n * n, n * n):
        raise ShapeMismatch(f"superoperator must be n^2 x n^2, got {S.shape}")
    return n


@dataclass(frozen=True)
class Generator:
    """Heisenberg-picture generator ``L`` with optional GKS parts."""

    L: np.ndarray
    phi: np.ndarray | None = None
    G: np.ndarray | None = None
    H: np.ndarray | None = None

    def __post_init__(self):
        L = np.array(self.L, dtype=complex)
        _n_of(L)
        L.setflags(write=False)
        object.__setattr__(self, "L", L)

    @property
    def n(self) -> int:
        return _n_of(self.L)

    @property
    def L_dagger(self) -> np.ndarray:
        return self.L.conj().T

    def apply(self, A) -> np.ndarray:
        return unvec(self.L @ vec(np.asarray(A, complex)), (self.n, self.n))

    def apply_dagger(self, rho) -> np.ndarray:
        return unvec(self.L_dagger @ vec(np.asarray(rho, complex)), (self.n, self.n))

    def to_json(self) -> dict:
        return {"superoperator": matrix_to_json(self.L)}

    @classmethod
    def from_json(cls, obj: dict) -> "Generator":
        if "superoperator" in obj:
            return cls(matrix_from_json(obj["superoperator"]))
        if "phi" in obj:
            phi = QuantumChannel.from_json(obj["phi"])
            H = matrix_from_json(obj["H"]) if "H" in obj else np.zeros((phi.dim_in, phi.dim_in))
            return assemble_gks(phi, H)
        raise InvalidInput("generator JSON needs 'superoperator' or 'phi'")


def jump_superop(V, omega: float) -> np.ndarray:
    """Superoperator of ``e^(-omega/2) (V^*[A, V] + [V^*, A] V)``."""
    V = np.asarray(V, complex)
    Vd = V.conj().T
    S = 2 * superop_lr(Vd, V) - left_mul(Vd @ V) - right_mul(Vd @ V)
    return np.exp(-omega / 2) * S


@dataclass(frozen=True)
class DBGenerator:
    sigma: np.ndarray
    jumps: tuple  # of (V_j, omega_j)
    bohr_tolerance: float = BOHR_ATOL

    def __init__(self, sigma, jumps, bohr_tolerance: float = BOHR_ATOL, validate: bool = True):
        sigma = density(sigma, strict=True)
        js = []
        for V, omega in jumps:
            V = np.array(V, dtype=complex)
            if V.shape != sigma.shape:
                raise ShapeMismatch("jump operators must match sigma's size")
            V.setflags(write=False)
            js.append((V, float(omega)))
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "jumps", tuple(js))
        object.__setattr__(self, "bohr_tolerance", bohr_tolerance)
        if validate:
            self.validate()

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    @property
    def V(self) -> list[np.ndarray]:
        return [V for V, _ in self.jumps]

    @property
    def omegas(self) -> np.ndarray:
        return np.array([w for _, w in self.jumps])

    def superop(self) -> np.ndarray:
        n = self.n
        L = np.zeros((n * n, n * n), complex)
        for V, omega in self.jumps:
            L += jump_superop(V, omega)
        return L

    def generator(self) -> Generator:
        return Generator(self.superop())

    def apply(self, A) -> np.ndarray:
        A = np.asarray(A, complex)
        out = np.zeros_like(A)
        for V, omega in self.jumps:
            Vd = V.conj().T
            out += np.exp(-omega / 2) * (Vd @ (A @ V - V @ A) + (Vd @ A - A @ Vd) @ V)
        return out

    def apply_dagger(self, rho) -> np.ndarray:
        """``L^dagger rho = sum e^(-omega/2) ([V, rho V^*] + [V rho, V^*])``."""
        rho = np.asarray(rho, complex)
        out = np.zeros_like(rho)
        for V, omega in self.jumps:
            Vd = V.conj().T
            out += np.exp(-omega / 2) * (V @ rho @ Vd - rho @ Vd @ V + V @ rho @ Vd - Vd @ V @ rho)
        return out

    def modular_residual(self) -> float:
        """``max_j |sigma V_j sigma^-1 - e^(-omega_j) V_j|``."""
        w, U = eigh(self.sigma)
        s_inv = (U / w) @ U.conj().T
        res = 0.0
        for V, omega in self.jumps:
            scale = max(1.0, float(np.max(np.abs(V))))
            res = max(res, float(np.max(np.abs(self.sigma @ V @ s_inv - np.exp(-omega) * V))) / scale)
        return res

    def pairing(self) -> list[int]:
        return closure_pairing(self.jumps, JUMP_TOL)

    def validate(self) -> None:
        r = self.modular_residual()
        if r > JUMP_TOL:
            raise NotDetailedBalance(f"jump violates sigma V sigma^-1 = e^-omega V by {r:.2e}", r)
        self.pairing()

    def to_json(self) -> dict:
        return {
            "sigma": matrix_to_json(self.sigma),
            "jumps": [{"V": matrix_to_json(V), "omega": omega} for V, omega in self.jumps],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DBGenerator":
        try:
            sigma = matrix_from_json(obj["sigma"])
            jumps = [(matrix_from_json(j["V"]), float(j["omega"])) for j in obj["jumps"]]
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed DB generator JSON: {exc}") from exc
        return cls(sigma, jumps)


def closure_pairing(jumps, tol: float = JUMP_TOL) -> list[int]:
    """Index ``j*`` with ``V_j* = V_j^*`` and ``omega_j* = -omega_j`` for every ``j``.

    Greedy nearest match; raises InvalidInput when no partner is within ``tol``.
    """
    partner = []
    for V, omega in jumps:
        target = V.conj().T
        scale = max(1.0, float(np.max(np.abs(V))))
        costs = [
            max(float(np.max(np.abs(W - target))) / scale, abs(w + omega)) for W, w in jumps
        ]
        k = int(np.argmin(costs))
        if costs[k] > tol:
            raise InvalidInput(f"jump set is not closed under adjoints (best mismatch {costs[k]:.2e})")
        partner.append(k)
    return partner


# -- GKS form -------------------------------------------------------------


def _phi_superop(phi) -> np.ndarray:
    if isinstance(phi, QuantumChannel):
        if phi.dim_in != phi.dim_out:
            raise ShapeMismatch("GKS assembly needs a map of M_n into itself")
        return phi.superop()
    return np.asarray(phi, complex)


def assemble_gks(phi, H) -> Generator:
    """``L(A) = Phi(A) - (Phi(1) A + A Phi(1))/2 + i[H, A]`` for completely positive ``Phi``."""
    S = _phi_superop(phi)
    n = _n_of(S)
    H = hermitian(H)
    if H.shape != (n, n):
        raise ShapeMismatch("H must match the size of Phi")
    cp = is_completely_positive(S)
    if not cp.is_cp:
        raise NotCP(f"Phi is not completely positive (min eigenvalue {cp.min_eigenvalue:.3e})")
    P1 = unvec(S @ vec(np.eye(n, dtype=complex)), (n, n))
    L = S - 0.5 * (left_mul(P1) + right_mul(P1)) + 1j * commutator_superop(H)
    return Generator(L, phi=S, G=-0.5 * P1 - 1j * H, H=H)


def depolarizing_generator(n: int) -> Generator:
    """``L(X) = Tr[X] I / n - X``."""
    I = np.eye(n)
    S = np.outer(vec(I), vec(I)) / n  # X -> Tr[X] I / n
    return assemble_gks(S, np.zeros((n, n)))


def depolarizing_db(n: int) -> DBGenerator:
    """Self-adjoint jumps ``G_k / sqrt(2n)`` for an orthonormal traceless Hermitian basis ``G_k``."""
    basis = hermitian_unital_basis(n)[1:] / np.sqrt(n)  # unnormalized HS orthonormal
    return DBGenerator(np.eye(n) / n, [(G / np.sqrt(2 * n), 0.0) for G in basis])


def depolarizing_closed_form(n: int, t: float, A) -> np.ndarray:
    A = np.asarray(A, complex)
    return np.exp(-t) * A + (1 - np.exp(-t)) * np.trace(A) * np.eye(n) / n


class QMSCheck(NamedTuple):
    is_qms: bool
    min_eigenvalue: float
    phi: np.ndarray | None
    G: np.ndarray | None
    H: np.ndarray | None


def _check_unital_hp(L, tol=GEN_TOL):
    n = _n_of(L)
    scale = max(1.0, float(np.max(np.abs(L))))
    if np.max(np.abs(L @ vec(np.eye(n)))) > tol * scale:
        raise NotUnitalGenerator("L(I) != 0")
    # Hermiticity preservation: L(A^*) = L(A)^* on matrix units
    for k in range(n * n):
        E = np.zeros(n * n, complex)
        E[k] = 1
        A = unvec(E, (n, n))
        if np.max(np.abs(unvec(L @ vec(A.conj().T), (n, n)) - unvec(L @ E, (n, n)).conj().T)) > tol * scale:
            raise InvalidInput("generator does not preserve Hermiticity")
    return n


def is_qms_generator(L) -> QMSCheck:
    """Test the reduced characteristic matrix (identity row and column removed) for positivity.

    On success the GKS parts ``(Phi, G, H)`` with ``L(A) = Phi(A) + G^* A + A G``
    and ``G = -Phi(1)/2 - iH`` are returned.
    """
    L = np.asarray(L.L if isinstance(L, Generator) else L, complex)
    n = _check_unital_hp(L)
    cm = characteristic_matrix(L, hermitian_unital_basis(n))
    C = (cm.matrix + cm.matrix.conj().T) / 2
    R = C[1:, 1:]
    lam_min = float(np.linalg.eigvalsh(R)[0]) if R.size else 0.0
    if lam_min < -GEN_TOL * max(1.0, float(np.max(np.abs(C)))):
        return QMSCheck(False, lam_min, None, None, None)
    F = cm.basis
    phi = np.einsum("ab,aki,blj->ijkl", R, F[1:].conj(), F[1:]).reshape(n * n, n * n, order="F")
    G = C[0, 0] / 2 * np.eye(n) + np.einsum("b,bij->ij", C[0, 1:], F[1:])
    H = 0.5j * (G - G.conj().T)
    return QMSCheck(True, lam_min, phi, G, (H + H.conj().T) / 2)


# -- detailed balance -----------------------------------------------------


def _gns_gram(sigma) -> np.ndarray:
    """Gram matrix of ``<A, B> = Tr[A^* B sigma]`` on vec coordinates."""
    return np.kron(np.asarray(sigma).T, np.eye(sigma.shape[0]))


class DBCheck(NamedTuple):
    is_db: bool
    residual: float
    stationarity: float


def _as_superop(L) -> np.ndarray:
    if isinstance(L, Generator):
        return L.L
    if isinstance(L, DBGenerator):
        return L.superop()
    return np.asarray(L, complex)


def db_check_gns(L, sigma, tol: float = DB_TOL) -> DBCheck:
    """GNS self-adjointness residual ``max |<LA, B> - <A, LB>|`` over matrix units, plus ``|L^dagger sigma|``."""
    S = _as_superop(L)
    sigma = density(sigma, strict=True)
    W = _gns_gram(sigma)
    residual = float(np.max(np.abs(S.conj().T @ W - W @ S)))
    stationarity = float(np.max(np.abs(S.conj().T @ vec(sigma))))
    return DBCheck(residual <= tol and stationarity <= tol, residual, stationarity)


def modular_superop(sigma) -> np.ndarray:
    """``Delta_sigma: A -> sigma A sigma^-1``."""
    w, U = eigh(sigma)
    if w[0] <= 0:
        raise SingularMatrix("modular operator needs an invertible sigma")
    return superop_lr(sigma, (U / w) @ U.conj().T)


def modular_commutation_check(L, sigma) -> float:
    """``|L Delta - Delta L| / |L|`` (Frobenius)."""
    S = _as_superop(L)
    D = modular_superop(sigma)
    return float(np.linalg.norm(S @ D - D @ S) / max(np.linalg.norm(S), 1e-300))


class ModularData(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray
    clusters: list  # (omega, [(i, j), ...]) with omega = log lam_j - log lam_i for |u_i><u_j|


def bohr_clusters(omegas, atol: float = BOHR_ATOL) -> list[list[int]]:
    """Group real numbers with tolerance ``atol * (1 + |omega|)``."""
    omegas = np.asarray(omegas, float)
    groups: list[list[int]] = []
    for idx in np.argsort(omegas, kind="stable"):
        if groups:
            ref = omegas[groups[-1][0]]
            if abs(omegas[idx] - ref) <= atol * (1 + abs(ref)):
                groups[-1].append(int(idx))
                continue
        groups.append([int(idx)])
    return groups


def modular_data(sigma, atol: float = BOHR_ATOL) -> ModularData:
    w, U = eigh(sigma)
    if w[0] <= 0:
        raise SingularMatrix("sigma must be strictly positive")
    n = w.size
    pairs = [(i, j) for i in range(n) for j in range(n)]
    om = np.array([np.log(w[j]) - np.log(w[i]) for i, j in pairs])
    clusters = []
    for g in bohr_clusters(om, atol):
        clusters.append((float(np.mean(om[g])), [pairs[k] for k in g]))
    return ModularData(w, U, clusters)


def _commutant_basis(U, pairs, n):
    """Hermitian orthonormal (normalized HS) basis of the omega = 0 cluster, identity first."""
    units = []
    for i, j in pairs:
        if i == j:
            units.append(np.sqrt(n) * np.outer(U[:, i], U[:, i].conj()))
        elif i < j:
            E = np.outer(U[:, i], U[:, j].conj())
            units.append(np.sqrt(n / 2) * (E + E.conj().T))
            units.append(np.sqrt(n / 2) * 1j * (E - E.conj().T))
    # Gram-Schmidt starting from the identity; real coefficients keep Hermiticity
    basis = [np.eye(n, dtype=complex)]
    for F in units:
        v = F.copy()
        for B in basis:
            v = v - (np.vdot(B, v).real / n) * B
        nrm = np.sqrt(np.vdot(v, v).real / n)
        if nrm > 1e-8:
            basis.append(v / nrm)
    return basis


def alicki_decompose(L, sigma, rank_rtol: float = 1e-10) -> DBGenerator:
    """Decompose a GNS detailed-balance generator into eigen-jumps ``(V_j, omega_j)``.

    The characteristic matrix is taken in an eigenbasis of the modular
    operator (matrix units of sigma's eigenbasis, with a Hermitian basis
    containing the identity inside the omega = 0 cluster).  Detailed balance
    makes it block diagonal in omega.  Blocks with omega >= 0 are
    diagonalized; the blocks with omega < 0 are covered by the adjoints of the
    omega > 0 jumps, which is what closure under adjoints requires.
    """
    S = _as_superop(L)
    n = _n_of(S)
    sigma = density(sigma, strict=True)
    db = db_check_gns(S, sigma)
    if not db.is_db:
        raise NotDetailedBalance(
            f"detailed balance residual {max(db.residual, db.stationarity):.3e} > tol {DB_TOL:g}",
            max(db.residual, db.stationarity),
        )
    md = modular_data(sigma)
    basis, labels = [], []
    for omega, pairs in md.clusters:
        if abs(omega) <= BOHR_ATOL:
            block = _commutant_basis(md.vectors, pairs, n)
            omega = 0.0
        else:
            block = [np.sqrt(n) * np.outer(md.vectors[:, i], md.vectors[:, j].conj()) for i, j in pairs]
        basis.extend(block)
        labels.extend([omega] * len(block))
    F = np.array(basis)
    labels = np.array(labels)
    C = characteristic_matrix(S, F).matrix
    C = (C + C.conj().T) / 2
    is_identity = np.zeros(len(F), bool)
    is_identity[[k for k in range(len(F)) if labels[k] == 0.0][0]] = True
    same = np.abs(labels[:, None] - labels[None, :]) <= BOHR_ATOL * (1 + np.abs(labels[:, None]))
    leak = float(np.max(np.abs(C[~same]), initial=0.0))
    if leak > JUMP_TOL * max(1.0, float(np.max(np.abs(C)))):
        raise BlockLeakage(f"characteristic matrix couples distinct Bohr frequencies ({leak:.2e})", leak)

    reduced_trace = float(np.trace(C).real - C[is_identity, is_identity].real.sum())
    jumps = []
    for omega in np.unique(labels):
        if omega < 0:
            continue
        idx = np.flatnonzero((labels == omega) & ~is_identity)
        if idx.size == 0:
            continue
        block = C[np.ix_(idx, idx)]
        if omega == 0.0:
            imag = float(np.max(np.abs(block.imag)))
            if imag > JUMP_TOL * max(1.0, float(np.max(np.abs(block)))):
                raise NotDetailedBalance(f"omega = 0 block is not real symmetric ({imag:.2e})", imag)
            # real eigenvectors in a Hermitian basis give Hermitian, self-paired jumps
            block = block.real
        vals, vecs = np.linalg.eigh(block)
        # relative to the block trace, floored so numerically empty blocks yield nothing
        cut = max(rank_rtol * float(np.trace(block).real), 1e-12 * reduced_trace, np.finfo(float).tiny)
        for c, u in zip(vals, vecs.T):
            if c <= cut:
                continue
            W = np.einsum("b,bij->ij", u.conj(), F[idx])
            if omega == 0.0:
                jumps.append((np.sqrt(c / 2) * (W + W.conj().T) / 2, 0.0))
            else:
                V = np.sqrt(c * np.exp(omega / 2) / 2) * W
                jumps.append((V, float(omega)))
                jumps.append((V.conj().T, -float(omega)))
    out = DBGenerator(sigma, jumps)
    res = reconstruction_residual(out, S)
    if res > JUMP_TOL:
        raise NotDetailedBalance(f"decomposition does not reproduce the generator (residual {res:.2e})", res)
    return out


def reconstruction_residual(db: DBGenerator, L) -> float:
    """``|L - sum_j e^(-omega_j/2) L_j| / |L|`` (Frobenius)."""
    S = _as_superop(L)
    return float(np.linalg.norm(S - db.superop()) / max(np.linalg.norm(S), 1e-300))


def commutator_identity_residual(db: DBGenerator) -> float:
    """``max_j |[V_j, H] + omega_j V_j|`` with ``H = -log sigma``."""
    w, U = eigh(db.sigma)
    H = -(U * np.log(w)) @ U.conj().T
    return max((float(np.max(np.abs(V @ H - H @ V + om * V))) for V, om in db.jumps), default=0.0)


class ErgodicityResult(NamedTuple):
    ergodic: bool
    commutant_dim: int


def ergodicity_check(db: DBGenerator) -> ErgodicityResult:
    """Dimension of the joint commutant of the jumps (stacked commutator superoperators)."""
    n = db.n
    if not db.jumps:
        return ErgodicityResult(n * n == 1, n * n)
    D = np.vstack([commutator_superop(V) for V in db.V])
    s = np.linalg.svd(D, compute_uv=False)
    s = np.concatenate([s, np.zeros(max(0, n * n - s.size))])
    dim = int(np.sum(s <= ERGODIC_RTOL * max(float(s[0]), 1e-300)))
    return ErgodicityResult(dim == 1, dim)


def null_space_dim(L) -> int:
    S = _as_superop(L)
    return null_space(S, rcond=ERGODIC_RTOL).shape[1]


# -- semigroup --------------------------------------------------------------


def semigroup_superop(L, t: float) -> np.ndarray:
    if t < 0:
        raise InvalidInput("semigroup time must be non-negative")
    return expm(t * _as_superop(L))


def semigroup_apply(L, t: float, X, side: str = "heisenberg") -> np.ndarray:
    """``P_t X = e^(tL) X`` (Heisenberg) or ``P_t^dagger X`` (Schroedinger)."""
    P = semigroup_superop(L, t)
    if side == "schroedinger":
        P = P.conj().T
    elif side != "heisenberg":
        raise InvalidInput("side must be 'heisenberg' or 'schroedinger'")
    X = np.asarray(X, complex)
    return unvec(P @ vec(X), X.shape)


def bkm_gram(sigma) -> np.ndarray:
    w, U = eigh(sigma)
    if w[0] <= 0:
        raise SingularMatrix("BKM inner product needs an invertible sigma")
    return _kernels.frame_superop(U, U, _kernels.logmean(w[:, None], w[None, :]))


def bkm_selfadjoint_check(L, sigma) -> float:
    """``max |<LA, B>_BKM - <A, LB>_BKM|`` over matrix units."""
    S = _as_superop(L)
    W = bkm_gram(density(sigma, strict=True))
    return float(np.max(np.abs(S.conj().T @ W - W @ S)))


# -- random instances -------------------------------------------------------


def random_db_generator(n: int, seed=None, n_pairs: int | None = None, diagonal: bool = True, sigma=None) -> DBGenerator:
    """Random GNS detailed-balance generator built from eigen-jumps.

    Jumps are complex multiples of matrix units ``|u_i><u_j|`` in sigma's
    eigenbasis (each with its adjoint partner) plus, optionally, one Hermitian
    jump diagonal in that basis.  With all pairs ``i < j`` present the
    generator is ergodic.
    """
    rng = np.random.default_rng(seed)
    if sigma is None:
        sigma = random_density(n, strict=True, seed=rng, eps=0.05)
    w, U = eigh(sigma)
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if n_pairs is None or n_pairs >= len(all_pairs):
        chosen = all_pairs
    else:
        chosen = [all_pairs[k] for k in sorted(rng.choice(len(all_pairs), n_pairs, replace=False))]
    jumps = []
    for i, j in chosen:
        c = complex(ginibre((), rng))
        V = c * np.outer(U[:, i], U[:, j].conj())
        omega = float(np.log(w[j]) - np.log(w[i]))
        jumps += [(V, omega), (V.conj().T, -omega)]
    if diagonal:
        d = rng.standard_normal(n)
        jumps.append(((U * d) @ U.conj().T, 0.0))
    return DBGenerator(sigma, jumps)


def thermal_qubit_db(beta_omega: float = 1.0, rate: float = 1.0) -> DBGenerator:
    """Qubit with lowering/raising pair; sigma = diag(1, e^-beta_omega) / Z."""
    p = np.array([1.0, np.exp(-beta_omega)])
    sigma = np.diag(p / p.sum())
    lower = np.sqrt(rate) * np.array([[0, 1], [0, 0]], complex)  # |0><1|
    omega = float(np.log(p[1] / p[0]))  # log lam_1 - log lam_0
    return DBGenerator(sigma, [(lower, omega), (lower.conj().T, -omega)])
