"""Non-commutative calculus for a detailed-balance generator and the
entropy transport metric.

Vector fields are arrays of shape ``(J, n, n)``, one component per jump.

* ``grad A = ([V_j, A])_j`` and ``div F = sum_j [F_j, V_j^*]`` (minus the adjoint of ``grad``)
* ``M_rho F`` multiplies component ``j`` in rho's eigenframe by the logarithmic mean
  of ``e^(omega_j/2) lam_k`` (row) and ``e^(-omega_j/2) lam_l`` (column)
* ``K_rho A = -div(M_rho grad A)``; the metric is ``g_rho(A, A) = <A, K_rho^+ A>``

The geodesic distance is the square root of the minimal discrete
Benamou-Brenier action over paths with ``m`` intervals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import IndexMismatch, InvalidInput, NotErgodic, SingularMatrix
from .lindblad import DBGenerator
from .matcore import commutator_superop, density, eigh, hermitian, matrix_from_json, matrix_to_json, unvec, vec

STRICT_TOL = 1e-10
KERNEL_RTOL = 1e-10
TRACELESS_TOL = 1e-10
PATH_FLOOR = 1e-9


def gradient(db: DBGenerator, A) -> np.ndarray:
    A = np.asarray(A, complex)
    return np.array([V @ A - A @ V for V in db.V])


def divergence(db: DBGenerator, F) -> np.ndarray:
    F = np.asarray(F, complex)
    if F.ndim != 3 or F.shape[0] != len(db.jumps):
        raise IndexMismatch(f"vector field has {F.shape[0] if F.ndim == 3 else '?'} components, expected {len(db.jumps)}")
    out = np.zeros(F.shape[1:], complex)
    for Fj, V in zip(F, db.V):
        Vd = V.conj().T
        out += Fj @ Vd - Vd @ Fj
    return out


def field_inner(F, G) -> complex:
    """``sum_j Tr[F_j^* G_j]``."""
    return complex(np.vdot(np.asarray(F), np.asarray(G)))


def gradient_superop(db: DBGenerator) -> np.ndarray:
    """``(J n^2) x n^2`` matrix of ``grad``; ``div`` is minus its conjugate transpose."""
    return np.vstack([commutator_superop(V) for V in db.V])


def stack(F) -> np.ndarray:
    return np.concatenate([vec(Fj) for Fj in np.asarray(F)])


def unstack(v, J: int, n: int) -> np.ndarray:
    return np.array([unvec(c, (n, n)) for c in np.asarray(v).reshape(J, n * n)])


def _hermitian_pinv(S, what="operator", expect_kernel: int | None = None):
    """Pseudo-inverse of a Hermitian PSD superoperator by spectral cut-off."""
    S = (S + S.conj().T) / 2
    w, U = np.linalg.eigh(S)
    cut = KERNEL_RTOL * max(float(np.max(np.abs(w))), np.finfo(float).tiny)
    keep = w > cut
    kernel = int(np.sum(~keep))
    if expect_kernel is not None and kernel != expect_kernel:
        raise NotErgodic(f"{what} has a {kernel}-dimensional kernel; the generator is not ergodic")
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    return (U * inv) @ U.conj().T, w


def l0_superop(db: DBGenerator) -> np.ndarray:
    D = gradient_superop(db)
    return -D.conj().T @ D


def l0_pinv(db: DBGenerator) -> np.ndarray:
    """Generalized inverse of ``L_0 = div grad`` (kernel ``span{I}`` for ergodic generators)."""
    P, _ = _hermitian_pinv(-l0_superop(db), "L_0", expect_kernel=1)
    return -P


# -- weights ----------------------------------------------------------------


def _strict_eigh(rho):
    rho = hermitian(rho)
    w, U = np.linalg.eigh(rho)
    if w[0] <= STRICT_TOL:
        raise SingularMatrix(f"rho must be strictly positive (min eigenvalue {w[0]:.3e})")
    return w, U


def m_weights(lam, omega: float) -> np.ndarray:
    return _kernels.logmean(np.exp(omega / 2) * lam[:, None], np.exp(-omega / 2) * lam[None, :])


def m_rho_apply(db: DBGenerator, rho, F) -> np.ndarray:
    w, U = _strict_eigh(rho)
    F = np.asarray(F, complex)
    if F.shape[0] != len(db.jumps):
        raise IndexMismatch("vector field length does not match the jump set")
    return np.array([_kernels.frame_multiplier(U, U, m_weights(w, om), Fj) for Fj, om in zip(F, db.omegas)])


def m_rho_pinv_apply(db: DBGenerator, rho, F) -> np.ndarray:
    w, U = _strict_eigh(rho)
    F = np.asarray(F, complex)
    if F.shape[0] != len(db.jumps):
        raise IndexMismatch("vector field length does not match the jump set")
    return np.array([_kernels.frame_multiplier(U, U, 1.0 / m_weights(w, om), Fj) for Fj, om in zip(F, db.omegas)])


def action(db: DBGenerator, rho, F) -> float:
    """``<F, M_rho^-1 F>``."""
    return float(np.real(field_inner(F, m_rho_pinv_apply(db, rho, F))))


def m_rho_superop(db: DBGenerator, rho) -> list[np.ndarray]:
    w, U = _strict_eigh(rho)
    return [_kernels.frame_superop(U, U, m_weights(w, om)) for om in db.omegas]


@dataclass(frozen=True)
class MetricOperator:
    db: DBGenerator
    rho: np.ndarray
    K: np.ndarray
    _pinv: np.ndarray | None = field(default=None, repr=False)
    spectrum: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.rho.shape[0]

    @property
    def pinv(self) -> np.ndarray:
        if self._pinv is None:
            raise NotErgodic("K_rho is not invertible on traceless matrices; the generator is not ergodic")
        return self._pinv

    def apply(self, A) -> np.ndarray:
        return unvec(self.K @ vec(np.asarray(A, complex)), (self.n, self.n))

    def pinv_apply(self, A) -> np.ndarray:
        return unvec(self.pinv @ vec(np.asarray(A, complex)), (self.n, self.n))


def _frame_blocks(db: DBGenerator, U, blocks=None) -> np.ndarray:
    """``commutator_superop(U^* V_j U)`` stacked to shape ``(J, n^2, n^2)``."""
    if blocks is not None:
        F = np.kron(U.conj(), U)
        return F.conj().T @ blocks @ F
    return np.array([commutator_superop(U.conj().T @ V @ U) for V in db.V])


def _k_frame(db: DBGenerator, lam, Dt) -> np.ndarray:
    """``K_rho`` written in the eigenframe of rho, where every ``M_j`` is diagonal."""
    half = np.exp(np.asarray(db.omegas) / 2)[:, None, None]
    W = _kernels.logmean(half * lam[None, :, None], lam[None, None, :] / half)
    W = W.transpose(0, 2, 1).reshape(len(db.jumps), -1)
    Kt = np.einsum("jab,ja,jac->bc", Dt.conj(), W, Dt)
    return (Kt + Kt.conj().T) / 2


def k_rho(db: DBGenerator, rho, blocks=None) -> MetricOperator:
    """Assemble ``K_rho = sum_j d_j^dagger M_j d_j``; the pseudo-inverse is cached when the kernel is ``span{I}``.

    ``blocks`` may carry the stacked ``commutator_superop(V_j)`` matrices.
    """
    rho = hermitian(rho)
    lam, U = _strict_eigh(rho)
    Kt = _k_frame(db, lam, _frame_blocks(db, U, blocks))
    F = np.kron(U.conj(), U)
    K = F @ Kt @ F.conj().T
    K = (K + K.conj().T) / 2
    try:
        Pt, spec = _hermitian_pinv(Kt, "K_rho", expect_kernel=1)
        P = F @ Pt @ F.conj().T
    except NotErgodic:
        P, spec = None, np.linalg.eigvalsh(Kt)
    return MetricOperator(db, rho, K, P, spec)


def _tangent(A, n):
    A = np.asarray(A, complex)
    if A.shape != (n, n):
        raise InvalidInput(f"tangent vector must be {n}x{n}")
    A = hermitian(A)
    if abs(np.trace(A)) > TRACELESS_TOL * max(1.0, float(np.max(np.abs(A)))):
        raise InvalidInput("tangent vector must be traceless")
    return A


def metric_eval(db: DBGenerator, rho, A_dot, K: MetricOperator | None = None) -> float:
    """``g_rho(A, A) = <A, K_rho^+ A>`` for traceless Hermitian ``A``."""
    K = k_rho(db, rho) if K is None else K
    A_dot = _tangent(A_dot, K.n)
    return float(np.real(np.vdot(A_dot, K.pinv_apply(A_dot))))


def log_ratio(db: DBGenerator, rho) -> np.ndarray:
    """``log rho - log sigma``."""
    w, U = _strict_eigh(rho)
    ws, Us = eigh(db.sigma)
    return (U * np.log(w)) @ U.conj().T - (Us * np.log(ws)) @ Us.conj().T


def chain_rule_residual(db: DBGenerator, rho) -> float:
    """``max_j |e^(-w/2) V rho - e^(w/2) rho V - M_j(d_j(log rho - log sigma))|``."""
    grad_log = gradient(db, log_ratio(db, rho))
    rhs = m_rho_apply(db, rho, grad_log)
    res = 0.0
    for (V, om), R in zip(db.jumps, rhs):
        lhs = np.exp(-om / 2) * V @ rho - np.exp(om / 2) * rho @ V
        res = max(res, float(np.linalg.norm(lhs - R)))
    return res


def gradflow_residual(db: DBGenerator, rho) -> float:
    """``|L^dagger rho + K_rho(log rho - log sigma)|``."""
    K = k_rho(db, rho)
    return float(np.linalg.norm(db.apply_dagger(rho) + K.apply(log_ratio(db, rho))))


def flux_projection(db: DBGenerator, rho, rho_dot, K: MetricOperator | None = None) -> np.ndarray:
    """Minimal-action flux ``F = M_rho grad(K_rho^+ rho_dot)``; ``div F = -rho_dot``."""
    K = k_rho(db, rho) if K is None else K
    rho_dot = _tangent(rho_dot, K.n)
    return m_rho_apply(db, rho, gradient(db, K.pinv_apply(rho_dot)))


def entropy_production(db: DBGenerator, rho) -> float:
    """``-Tr[L^dagger rho (log rho - log sigma)]``."""
    return float(-np.real(np.trace(db.apply_dagger(rho) @ log_ratio(db, rho))))


# -- Benamou-Brenier geodesics ----------------------------------------------


@dataclass
class GeodesicPath:
    densities: list
    fluxes: list
    interval_actions: list
    action: float
    converged: bool = True
    iterations: int = 0

    @property
    def m(self) -> int:
        return len(self.densities) - 1

    def continuity_residual(self, db: DBGenerator) -> float:
        ds = 1.0 / self.m
        return max(
            (
                float(np.max(np.abs(self.densities[k + 1] - self.densities[k] + ds * divergence(db, F))))
                for k, F in enumerate(self.fluxes)
            ),
            default=0.0,
        )

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "action": self.action,
            "distance": float(np.sqrt(max(self.action, 0.0))),
            "converged": self.converged,
            "iterations": self.iterations,
            "densities": [matrix_to_json(r) for r in self.densities],
            "fluxes": [[matrix_to_json(c) for c in F] for F in self.fluxes],
            "interval_actions": list(self.interval_actions),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GeodesicPath":
        return cls(
            [matrix_from_json(r) for r in obj["densities"]],
            [np.array([matrix_from_json(c) for c in F]) for F in obj["fluxes"]],
            list(obj["interval_actions"]),
            float(obj["action"]),
            bool(obj.get("converged", True)),
            int(obj.get("iterations", 0)),
        )


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_GL_NODES = (_GL_NODES + 1) / 2
_GL_WEIGHTS = _GL_WEIGHTS / 2


def _power_dd_nodes(lam, powers) -> np.ndarray:
    """``(lam_k^p - lam_l^p) / (lam_k - lam_l)`` for each ``p`` in ``powers``, shape ``(P, n, n)``."""
    a, b = lam[:, None], lam[None, :]
    d = a - b
    near = _kernels._close(a, b)
    safe = np.where(near, 1.0, d)
    p = powers[:, None, None]
    far_val = (a**p - b**p) / safe
    mid = (a + b) / 2
    near_val = p * mid ** (p - 1)
    return np.where(near, near_val, far_val)


def _weight_gradient(lam, U, X_list, omegas) -> np.ndarray:
    """Gradient in rho of ``sum_j <X_j, M_j(rho) X_j>`` for fixed ``X_j`` (HS, Hermitian).

    Uses ``<X, M X> = int_0^1 e^(omega (s - 1/2)) Tr[X^* rho^s X rho^(1-s)] ds``
    with Gauss-Legendre quadrature in ``s``.
    """
    s, ws = _GL_NODES, _GL_WEIGHTS
    pdd_s = _power_dd_nodes(lam, s)
    pdd_1s = _power_dd_nodes(lam, 1 - s)
    lam_s = lam[None, :] ** s[:, None]
    lam_1s = lam[None, :] ** (1 - s)[:, None]
    G = np.zeros((lam.size, lam.size), complex)
    for X, om in zip(X_list, omegas):
        Xt = U.conj().T @ X @ U
        c = ws * np.exp(om * (s - 0.5))
        Y1 = np.einsum("kp,sp,lp->skl", Xt, lam_1s, Xt.conj())  # X rho^(1-s) X^*
        Y2 = np.einsum("pk,sp,pl->skl", Xt.conj(), lam_s, Xt)  # X^* rho^s X
        G += np.einsum("s,skl->kl", c, pdd_s * Y1 + pdd_1s * Y2)
    G = U @ G @ U.conj().T
    return (G + G.conj().T) / 2


def _project_density(rho, floor=PATH_FLOOR):
    w, U = np.linalg.eigh((rho + rho.conj().T) / 2)
    w = np.clip(w, floor, None)
    w = w / w.sum()
    return (U * w) @ U.conj().T


def _interval_terms(db, r0, r1, m, need_grad, blocks):
    mid = (r0 + r1) / 2
    lam, U = _strict_eigh(mid)
    Pt, _ = _hermitian_pinv(_k_frame(db, lam, _frame_blocks(db, U, blocks)), "K_rho", expect_kernel=1)
    n = lam.size
    delta = r1 - r0
    B = U @ unvec(Pt @ vec(U.conj().T @ delta @ U), (n, n)) @ U.conj().T
    B = (B + B.conj().T) / 2
    cost = m * float(np.real(np.vdot(delta, B)))
    if not need_grad:
        return cost, None, None
    g_mid = -m * _weight_gradient(lam, U, gradient(db, B), db.omegas)
    return cost, 2 * m * B, g_mid


def _path_objective(db, path, m, need_grad=False, blocks=None):
    blocks = np.array([commutator_superop(V) for V in db.V]) if blocks is None else blocks
    total = 0.0
    grads = [np.zeros_like(path[0]) for _ in path]
    costs = []
    for k in range(m):
        c, g_delta, g_mid = _interval_terms(db, path[k], path[k + 1], m, need_grad, blocks)
        total += c
        costs.append(c)
        if need_grad:
            grads[k + 1] += g_delta + g_mid / 2
            grads[k] += -g_delta + g_mid / 2
    if need_grad:
        n = path[0].shape[0]
        for k in range(m + 1):
            grads[k] -= np.trace(grads[k]) / n * np.eye(n)
    return total, costs, grads


def _exp_interpolation(rho0, rho1, m):
    w0, U0 = _strict_eigh(rho0)
    w1, U1 = _strict_eigh(rho1)
    L0 = (U0 * np.log(w0)) @ U0.conj().T
    L1 = (U1 * np.log(w1)) @ U1.conj().T
    path = []
    for k in range(m + 1):
        s = k / m
        w, U = np.linalg.eigh((1 - s) * L0 + s * L1)
        e = np.exp(w - w.max())
        path.append((U * (e / e.sum())) @ U.conj().T)
    path[0], path[-1] = rho0, rho1
    return path


def geodesic_distance(
    db: DBGenerator,
    rho0,
    rho1,
    m: int = 16,
    max_iter: int = 5000,
    tol: float = 1e-8,
    patience: int = 5,
) -> tuple[float, GeodesicPath]:
    """Discrete Benamou-Brenier distance between strict states.

    Fluxes are eliminated exactly (flux projection per interval), and the
    interior densities are moved along a preconditioned gradient (local
    ``K_rho`` times the inverse path Laplacian, a Newton step for frozen
    weights) followed by projection onto strict states.  A step is accepted
    only if the action does not increase, otherwise it is halved.
    """
    if m < 4:
        raise InvalidInput("need at least 4 intervals")
    rho0 = density(rho0, strict=True)
    rho1 = density(rho1, strict=True)
    n = rho0.shape[0]
    K0 = k_rho(db, rho0)
    K0.pinv  # raises NotErgodic early

    blocks = np.array([commutator_superop(V) for V in db.V])
    path = _exp_interpolation(rho0, rho1, m)
    value, costs, grads = _path_objective(db, path, m, need_grad=True, blocks=blocks)
    # inverse of the interior second-difference matrix (Dirichlet ends)
    T_inv = np.linalg.inv(2 * np.eye(m - 1) - np.eye(m - 1, k=1) - np.eye(m - 1, k=-1)) / (2 * m)
    step = 1.0
    quiet = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        local = np.array([k_rho(db, p, blocks).apply(g) for p, g in zip(path[1:-1], grads[1:-1])])
        direction = np.einsum("ik,kab->iab", T_inv, local)
        direction = (direction + direction.conj().transpose(0, 2, 1)) / 2
        if float(np.real(np.vdot(direction, np.array(grads[1:-1])))) <= 1e-15 * max(value, 1e-300):
            converged = True
            break
        accepted = False
        for _ in range(60):
            trial = [path[0]] + [_project_density(p - step * d) for p, d in zip(path[1:-1], direction)] + [path[-1]]
            try:
                t_value, t_costs, _ = _path_objective(db, trial, m, blocks=blocks)
            except SingularMatrix:
                step /= 2
                continue
            if t_value <= value:
                accepted = True
                break
            step /= 2
        if not accepted:
            converged = True
            break
        rel = (value - t_value) / max(abs(value), 1e-300)
        path, value, costs = trial, t_value, t_costs
        _, _, grads = _path_objective(db, path, m, need_grad=True, blocks=blocks)
        step = min(1.0, 2 * step)
        quiet = quiet + 1 if rel <= tol else 0
        if quiet >= patience:
            converged = True
            break

    ds = 1.0 / m
    fluxes = [
        flux_projection(db, (path[k] + path[k + 1]) / 2, (path[k + 1] - path[k]) / ds) for k in range(m)
    ]
    geo = GeodesicPath(path, fluxes, costs, value, converged, it)
    return float(np.sqrt(max(value, 0.0))), geo


def two_point_oracle(p0: float, p1: float, m: int = 400) -> float:
    """Scalar Benamou-Brenier distance for diagonal qubit states under depolarizing jumps.

    In the commuting two-level case ``g = 2 pdot^2 / Lambda(p, 1 - p)`` with
    ``Lambda`` the logarithmic mean; the path ``p_k`` is optimized on a grid
    of ``m`` intervals with L-BFGS.
    """
    from scipy.optimize import minimize

    def cost(inner):
        p = np.concatenate([[p0], inner, [p1]])
        d = np.diff(p)
        mid = (p[:-1] + p[1:]) / 2
        lm = _kernels.logmean(mid, 1 - mid)
        val = m * np.sum(2 * d**2 / lm)
        # derivative of the log mean in its first argument evaluated via finite pieces
        h = 1e-7
        dl = (_kernels.logmean(mid + h, 1 - mid - h) - _kernels.logmean(mid - h, 1 - mid + h)) / (2 * h)
        g_d = m * 4 * d / lm
        g_mid = -m * 2 * d**2 / lm**2 * dl
        grad = np.zeros_like(p)
        grad[1:] += g_d + g_mid / 2
        grad[:-1] += -g_d + g_mid / 2
        return val, grad[1:-1]

    x0 = np.linspace(p0, p1, m + 1)[1:-1]
    res = minimize(cost, x0, jac=True, method="L-BFGS-B", bounds=[(1e-9, 1 - 1e-9)] * (m - 1),
                   options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 20000})
    return float(np.sqrt(res.fun))
