"""Two-variable operator means ``J_f``, monotone metrics and the three
monotonicity inequalities for unital completely positive maps.

``J_f(X, Y) = f(R_X L_Y^+) L_Y``.  In the frame ``E_ij = |v_i><u_j|`` built
from eigenvectors ``v`` of ``Y`` (eigenvalues ``mu``) and ``u`` of ``X``
(eigenvalues ``lam``) it is the Hadamard multiplier with weights
``f(lam_j / mu_i) mu_i`` (zero when ``mu_i = 0``).  For ``f(x) = x**t`` this
is ``K -> Y^(1-t) K X^t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .channels import QuantumChannel
from .errors import InvalidInput, PreconditionViolated, RangeViolation, ShapeMismatch, SingularMatrix
from .matcore import eigh, ginibre, hermitian, random_cptp, random_density

SLACK_TOL = 1e-8
RANGE_TOL = 1e-8
STRICT_TOL = 1e-10


@dataclass(frozen=True)
class OperatorMonotoneF:
    """An operator monotone ``f`` on ``(0, inf)`` with ``f(0) := 0``.

    ``kind`` is ``"power"`` (``x**t``), ``"logmean"`` (``(x - 1)/log x``) or
    ``"loewner"``: ``beta + gamma x + sum_k w_k (1 + s_k) x / (s_k + x)``
    with atoms ``(s_k, w_k)``, ``s_k > 0``, ``w_k > 0``.
    """

    kind: str
    t: float = 0.5
    beta: float = 0.0
    gamma: float = 0.0
    atoms: tuple = field(default=())

    def __post_init__(self):
        if self.kind == "power":
            if not 0 < self.t < 1:
                raise InvalidInput("power kind needs 0 < t < 1")
        elif self.kind == "loewner":
            if self.beta < 0 or self.gamma < 0:
                raise InvalidInput("Loewner intercept and slope must be non-negative")
            if any(s <= 0 or w <= 0 for s, w in self.atoms):
                raise InvalidInput("Loewner atoms need positive location and weight")
        elif self.kind != "logmean":
            raise InvalidInput(f"unknown operator monotone kind {self.kind!r}")

    def __call__(self, x):
        x = np.asarray(x, float)
        return self.perspective(x, np.ones_like(x))

    def perspective(self, lam, mu) -> np.ndarray:
        """``mu f(lam / mu)``, zero where ``mu == 0``."""
        lam, mu = np.broadcast_arrays(np.asarray(lam, float), np.asarray(mu, float))
        lam = np.clip(lam, 0.0, None)
        mu = np.clip(mu, 0.0, None)
        if self.kind == "power":
            out = lam**self.t * mu ** (1 - self.t)
        elif self.kind == "logmean":
            out = _kernels.logmean(lam, mu)
        else:
            out = self.beta * mu + self.gamma * lam
            for s, w in self.atoms:
                den = s * mu + lam
                with np.errstate(invalid="ignore", divide="ignore"):
                    term = np.where(den > 0, (1 + s) * lam * mu / np.where(den > 0, den, 1.0), 0.0)
                out = out + w * term
        return np.where(mu > 0, out, 0.0)


def power(t: float) -> OperatorMonotoneF:
    return OperatorMonotoneF("power", t=t)


LOGMEAN = OperatorMonotoneF("logmean")


def loewner(beta=0.0, gamma=0.0, atoms=()) -> OperatorMonotoneF:
    return OperatorMonotoneF("loewner", beta=beta, gamma=gamma, atoms=tuple(atoms))


class JOperator(NamedTuple):
    f: OperatorMonotoneF
    x_values: np.ndarray
    x_vectors: np.ndarray
    y_values: np.ndarray
    y_vectors: np.ndarray
    kernel: np.ndarray  # kernel[i, j] = mu_i f(lam_j / mu_i)

    @property
    def n(self) -> int:
        return self.kernel.shape[0]


def _psd(A, what):
    A = hermitian(A)
    w, U = eigh(A)
    if w[0] < -1e-10 * max(1.0, abs(w[-1])):
        raise InvalidInput(f"{what} must be positive semi-definite")
    return np.clip(w, 0.0, None), U


def j_operator(f: OperatorMonotoneF, X, Y) -> JOperator:
    lam, U = _psd(X, "X")
    mu, V = _psd(Y, "Y")
    if lam.size != mu.size:
        raise ShapeMismatch("X and Y must have the same size")
    return JOperator(f, lam, U, mu, V, f.perspective(lam[None, :], mu[:, None]))


def j_apply(J: JOperator, K) -> np.ndarray:
    return _kernels.frame_multiplier(J.y_vectors, J.x_vectors, J.kernel, np.asarray(K, complex))


def _pinv_kernel(J: JOperator):
    cut = 1e-12 * max(float(np.max(J.kernel)), np.finfo(float).tiny)
    keep = J.kernel > cut
    inv = np.zeros_like(J.kernel)
    inv[keep] = 1.0 / J.kernel[keep]
    return inv, keep


def j_pinv_apply(J: JOperator, K, check_range: bool = True) -> np.ndarray:
    """Generalized inverse of ``J``; ``K`` must lie in the range of ``J``."""
    K = np.asarray(K, complex)
    inv, keep = _pinv_kernel(J)
    Kt = J.y_vectors.conj().T @ K @ J.x_vectors
    if check_range:
        off = np.linalg.norm(Kt[~keep])
        if off > RANGE_TOL * max(np.linalg.norm(Kt), 1e-300):
            raise RangeViolation(f"argument has weight {off:.2e} outside the range of J_f")
    return J.y_vectors @ (inv * Kt) @ J.x_vectors.conj().T


def j_form(J: JOperator, K) -> float:
    """``<K, J K>`` (real because ``J`` is positive)."""
    Kt = J.y_vectors.conj().T @ np.asarray(K, complex) @ J.x_vectors
    return float(np.sum(J.kernel * np.abs(Kt) ** 2))


def j_pinv_form(J: JOperator, K, check_range: bool = True) -> float:
    K = np.asarray(K, complex)
    return float(np.real(np.vdot(K, j_pinv_apply(J, K, check_range))))


# -- monotone metrics ---------------------------------------------------------


def _strict(rho, what="rho"):
    w, U = eigh(rho)
    if w[0] <= STRICT_TOL:
        raise SingularMatrix(f"{what} must be strictly positive")
    return w, U


def gamma_t(rho, K, t: float) -> float:
    """``Tr[K rho^(t-1) K rho^(-t)]``."""
    w, U = _strict(rho)
    Kt = U.conj().T @ hermitian(K) @ U
    weights = w[:, None] ** (t - 1) * w[None, :] ** (-t)
    return float(np.sum(weights * np.abs(Kt) ** 2))


def gamma_hat(rho, K) -> float:
    """``Tr[int_0^inf K (s + rho)^-1 K (s + rho)^-1 ds]``."""
    w, U = _strict(rho)
    Kt = U.conj().T @ hermitian(K) @ U
    weights = _kernels.log_divided_difference(w[:, None], w[None, :])
    return float(np.sum(weights * np.abs(Kt) ** 2))


# -- monotonicity inequalities ------------------------------------------------

THEOREMS = ("L1M", "L2M", "L3M")


class SlackResult(NamedTuple):
    theorem: str
    lhs: float
    rhs: float
    slack: float
    passed: bool


def _unital_pair(phi: QuantumChannel):
    if not isinstance(phi, QuantumChannel):
        raise InvalidInput("expected a QuantumChannel")
    if phi.orientation != "unital":
        phi = phi.adjoint()
    return phi, phi.adjoint()


def _require_strict(A, what):
    if np.linalg.eigvalsh(hermitian(A))[0] <= STRICT_TOL:
        raise PreconditionViolated(f"{what} is not strictly positive")


def monotonicity_check(theorem: str, phi: QuantumChannel, X, Y, K, t: float = 0.5, f=None) -> SlackResult:
    """Slack ``majorant - minorant`` of one of the three monotonicity inequalities.

    ``phi`` is the unital CP map ``M_a -> M_b`` (a trace-preserving channel is
    replaced by its adjoint).  For ``L1M`` the matrices ``X, Y`` live in
    ``M_b`` and ``K`` in ``M_a``; for ``L2M`` and ``L3M`` all of ``X, Y, K``
    live in ``M_b``.
    """
    if theorem not in THEOREMS:
        raise InvalidInput(f"theorem must be one of {THEOREMS}")
    unital, tp = _unital_pair(phi)
    if f is None:
        f = LOGMEAN if theorem == "L3M" else power(t)
    X = np.asarray(X, complex)
    Y = np.asarray(Y, complex)
    K = np.asarray(K, complex)
    if theorem == "L1M":
        lhs = j_form(j_operator(f, X, Y), unital.apply(K))
        rhs = j_form(j_operator(f, tp.apply(X), tp.apply(Y)), K)
    else:
        for A, name in ((X, "X"), (Y, "Y")):
            _require_strict(A, name)
            _require_strict(tp.apply(A), f"Phi^dagger({name})")
        lhs = j_pinv_form(j_operator(f, tp.apply(X), tp.apply(Y)), tp.apply(K))
        rhs = j_pinv_form(j_operator(f, X, Y), K)
    slack = rhs - lhs
    return SlackResult(theorem, lhs, rhs, slack, bool(slack >= -SLACK_TOL))


class DualityReport(NamedTuple):
    primal_worst: float
    dual_worst: float
    primal_pass: bool
    dual_pass: bool

    @property
    def agree(self) -> bool:
        return self.primal_pass == self.dual_pass


def duality_check(f: OperatorMonotoneF, phi: QuantumChannel, X, Y, trials: int = 50, seed=None) -> DualityReport:
    """Evaluate the primal (``J_f``) and dual (``J_f^+``) forms on a common random batch.

    The dual form uses generalized inverses with explicit range checks, so
    ``Phi^dagger(X)`` need not be invertible.
    """
    unital, tp = _unital_pair(phi)
    rng = np.random.default_rng(seed)
    J_out = j_operator(f, X, Y)
    J_in = j_operator(f, tp.apply(X), tp.apply(Y))
    a, b = unital.dim_in, unital.dim_out
    primal, dual = np.inf, np.inf
    for _ in range(trials):
        K_in = ginibre((a, a), rng)
        primal = min(primal, j_form(J_in, K_in) - j_form(J_out, unital.apply(K_in)))
        K_out = ginibre((b, b), rng)
        dual = min(dual, j_pinv_form(J_out, K_out) - j_pinv_form(J_in, tp.apply(K_out)))
    return DualityReport(primal, dual, bool(primal >= -SLACK_TOL), bool(dual >= -SLACK_TOL))


class MonotonicityRow(NamedTuple):
    theorem: str
    n: int
    t: float
    slack: float
    passed: bool


def random_instance(n: int, m: int | None = None, seed=None):
    """Random ``(phi, X, Y)`` with ``phi`` unital CP ``M_n -> M_m`` and strict ``X, Y``."""
    rng = np.random.default_rng(seed)
    m = n if m is None else m
    n_kraus = int(rng.integers(-(-m // n), n * m + 1))
    # a trace-preserving channel M_m -> M_n has a unital adjoint M_n -> M_m
    phi = random_cptp(m, n, n_kraus, rng).adjoint()
    X = random_density(m, strict=True, seed=rng)
    Y = random_density(m, strict=True, seed=rng)
    return phi, X, Y


def monotonicity_suite(trials: int = 200, seed=None, dims=(2, 3, 4), ts=(0.25, 0.5, 0.75)) -> list[MonotonicityRow]:
    """``trials`` random instances, each evaluated under all three theorems.

    Instances where ``Phi^dagger(X)`` or ``Phi^dagger(Y)`` is singular are
    redrawn, so every theorem gets exactly ``trials`` rows.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for k in range(trials):
        n = int(dims[k % len(dims)])
        t = float(ts[k % len(ts)])
        for _ in range(100):
            m = int(rng.choice(dims))
            phi, X, Y = random_instance(n, m, rng)
            K_in = ginibre((n, n), rng)
            K_out = ginibre((m, m), rng)
            try:
                results = [monotonicity_check(th, phi, X, Y, K_in if th == "L1M" else K_out, t) for th in THEOREMS]
            except PreconditionViolated:
                continue
            break
        else:
            raise PreconditionViolated("could not draw an instance with invertible Phi^dagger(X), Phi^dagger(Y)")
        rows.extend(MonotonicityRow(r.theorem, n, t, r.slack, r.passed) for r in results)
    return rows
