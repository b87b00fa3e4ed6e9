"""Entropy-decay certificates for detailed-balance semigroups.

The intertwiner ``Q_t = grad P_t L_0^+ div`` carries gradients along the
semigroup.  Two dual sampled checks test the curvature bound ``lambda``:

* gradient estimate:  ``e^(2 lam t) <Q_t Z, M_rho Q_t Z> <= <Z, M_{P_t^dag rho} Z>``
  for gradient fields ``Z = grad Y``
* action dissipation: ``<Q_t^dag X, (P M_{P_t^dag rho} P)^+ Q_t^dag X> <= e^(-2 lam t) <X, M_rho^-1 X>``

where ``P`` projects on gradient fields.  For a fixed ``(rho, t)`` both
reduce to the same largest generalized eigenvalue ``mu``, so every trial
records the exact worst case over fields instead of a random field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import transport
from .entropy import relative_entropy, trace_distance
from .errors import InvalidInput, NotErgodic
from .lindblad import DBGenerator, semigroup_superop
from .matcore import commutator_superop, ginibre, unvec, vec

CHECK_TOL = 1e-7
DECAY_TOL = 1e-9
LSI_TOL = 1e-8
ENERGY_TOL = 1e-7
RATE_TOL = 1e-8
T_GRID = (1e-3, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 2.0)


# -- intertwiner ------------------------------------------------------------


def _gradient_basis(db: DBGenerator) -> tuple[np.ndarray, np.ndarray]:
    """``(G, E)``: stacked gradient matrix and an orthonormal basis of its range."""
    G = transport.gradient_superop(db)
    U, s, _ = np.linalg.svd(G, full_matrices=False)
    rank = int(np.sum(s > transport.KERNEL_RTOL * max(float(s[0]), 1e-300)))
    if rank != db.n**2 - 1:
        raise NotErgodic(f"gradient has rank {rank}, expected {db.n ** 2 - 1}")
    return G, U[:, :rank]


def intertwiner(db: DBGenerator, t: float) -> np.ndarray:
    """``Q_t = grad P_t L_0^+ div`` as a ``(J n^2) x (J n^2)`` superoperator on stacked fields."""
    if t < 0:
        raise InvalidInput("t must be non-negative")
    G = transport.gradient_superop(db)
    return G @ semigroup_superop(db.superop(), t) @ transport.l0_pinv(db) @ (-G.conj().T)


# -- commutator rates -------------------------------------------------------


class RateRow(NamedTuple):
    j: int
    a: float
    residual: float
    accepted: bool


@dataclass
class NoUniformRates:
    """Some ``[d_j, L]`` is not a multiple of ``d_j``; carries the fitted rows."""

    rows: list

    @property
    def worst(self) -> RateRow:
        return max(self.rows, key=lambda r: r.residual)


@dataclass
class RateCertificate:
    rows: list
    lam: float

    @property
    def certifies(self) -> bool:
        return self.lam > 0


def fit_commutator_rate(D, L, tol: float = RATE_TOL) -> tuple[float, float, bool]:
    """Least-squares ``a`` in ``[D, L] = -a D`` for superoperators ``D``, ``L``; returns ``(a, residual, accepted)``."""
    D = np.asarray(D, complex)
    C = D @ L - L @ D
    nD = float(np.linalg.norm(D))
    if nD == 0:
        r = float(np.linalg.norm(C))
        return 0.0, r, r == 0
    a = -float(np.real(np.vdot(D, C))) / nD**2
    r = float(np.linalg.norm(C + a * D))
    return a, r, r <= tol * nD * (1 + abs(a))


def commutator_rates(db: DBGenerator, tol: float = RATE_TOL):
    """Fit ``[d_j, L] = -a_j d_j`` for each jump.

    Returns a :class:`RateCertificate` with ``lam = min a_j`` when every fit
    is accepted, otherwise a :class:`NoUniformRates` value.
    """
    L = db.superop()
    rows = [RateRow(j, *fit_commutator_rate(commutator_superop(V), L, tol)) for j, V in enumerate(db.V)]
    if all(r.accepted for r in rows):
        return RateCertificate(rows, min((r.a for r in rows), default=0.0))
    return NoUniformRates(rows)


# -- sampled curvature checks -----------------------------------------------


class TrialRecord(NamedTuple):
    trial: int
    t: float
    rho_rank: int
    rho_eps: float
    mu: float
    slack: float


@dataclass
class CheckResult:
    check: str
    lam: float
    trials: int
    seed: int | None
    worst_slack: float
    passed: bool
    log: list = field(default_factory=list, repr=False)


def sample_strict_state(n: int, rng) -> tuple[np.ndarray, int, float]:
    """Mixture ``(1 - eps) W + eps I/n`` of a random rank-``k`` state ``W``; ``eps`` log-uniform in ``[1e-3, 1]``."""
    k = int(rng.integers(1, n + 1))
    eps = float(10 ** rng.uniform(-3, 0))
    A = ginibre((n, k), rng)
    W = A @ A.conj().T
    W = W / np.trace(W).real
    rho = (1 - eps) * W + eps * np.eye(n) / n
    return (rho + rho.conj().T) / 2, k, eps


class _CurvatureProblem:
    """Precomputed pieces shared by all trials of one generator."""

    def __init__(self, db: DBGenerator, t_grid=T_GRID):
        self.db = db
        self.G, self.E = _gradient_basis(db)
        self.L = db.superop()
        L0p = transport.l0_pinv(db)
        self.t_grid = tuple(float(t) for t in t_grid)
        self.P = {t: semigroup_superop(self.L, t) for t in self.t_grid}
        # Q_t restricted to the gradient subspace: Q_t E
        self.QE = {t: self.G @ self.P[t] @ L0p @ (-self.G.conj().T) @ self.E for t in self.t_grid}

    def _m_blocks(self, rho):
        return transport.m_rho_superop(self.db, rho)

    def _apply_m(self, blocks, Z):
        N = self.db.n**2
        return np.concatenate([B @ Z[j * N : (j + 1) * N] for j, B in enumerate(blocks)])

    def mu(self, rho, t) -> float:
        """``max_Z <Q_t Z, M_rho Q_t Z> / <Z, M_{P_t^dag rho} Z>`` over gradient fields ``Z``."""
        n = self.db.n
        rho_t = unvec(self.P[t].conj().T @ vec(rho), (n, n))
        rho_t = (rho_t + rho_t.conj().T) / 2
        M0 = self._m_blocks(rho)
        Mt = self._m_blocks(rho_t)
        QE = self.QE[t]
        A = QE.conj().T @ self._apply_m(M0, QE)
        B = self.E.conj().T @ self._apply_m(Mt, self.E)
        A = (A + A.conj().T) / 2
        B = (B + B.conj().T) / 2
        w, U = np.linalg.eigh(B)
        Bih = (U / np.sqrt(w)) @ U.conj().T
        return float(np.linalg.eigvalsh(Bih @ A @ Bih)[-1])


def _curvature_check(kind: str, db: DBGenerator, lam: float, trials: int, seed, problem=None) -> CheckResult:
    if trials < 1:
        raise InvalidInput("trials must be at least 1")
    problem = _CurvatureProblem(db) if problem is None else problem
    rng = np.random.default_rng(seed)
    log = []
    worst = np.inf
    for k in range(trials):
        t = problem.t_grid[k % len(problem.t_grid)]
        rho, rank, eps = sample_strict_state(db.n, rng)
        mu = problem.mu(rho, t)
        if kind == "action_dissipation":
            slack = np.exp(-2 * lam * t) - mu
        else:
            slack = 1.0 - np.exp(2 * lam * t) * mu
        log.append(TrialRecord(k, t, rank, eps, mu, float(slack)))
        worst = min(worst, float(slack))
    return CheckResult(kind, lam, trials, seed, worst, worst >= -CHECK_TOL, log)


def action_dissipation_check(db: DBGenerator, lam: float, trials: int = 200, seed=0, problem=None) -> CheckResult:
    """Worst normalized slack ``e^(-2 lam t) - mu`` over sampled ``(rho, t)``."""
    return _curvature_check("action_dissipation", db, lam, trials, seed, problem)


def gradient_estimate_check(db: DBGenerator, lam: float, trials: int = 200, seed=0, problem=None) -> CheckResult:
    """Worst normalized slack ``1 - e^(2 lam t) mu`` over sampled ``(rho, t)``."""
    return _curvature_check("gradient_estimate", db, lam, trials, seed, problem)


def gradient_estimate_value(db: DBGenerator, lam: float, rho, Y, t: float) -> float:
    """Unnormalized gradient-estimate slack for one explicit observable ``Y``."""
    n = db.n
    P = semigroup_superop(db.superop(), t)
    rho_t = unvec(P.conj().T @ vec(rho), (n, n))
    PY = unvec(P @ vec(np.asarray(Y, complex)), (n, n))
    gY = transport.gradient(db, Y)
    gPY = transport.gradient(db, PY)
    lhs = np.real(transport.field_inner(gY, transport.m_rho_apply(db, rho_t, gY)))
    rhs = np.real(transport.field_inner(gPY, transport.m_rho_apply(db, rho, gPY)))
    return float(lhs - np.exp(2 * lam * t) * rhs)


def empirical_lambda(db: DBGenerator, lam_max: float = 2.0, trials: int = 100, seed=0, iterations: int = 20) -> float:
    """Largest ``lambda`` in ``(0, lam_max]`` passing the action-dissipation check, by bisection.

    This is a sampled estimate, not a certificate.
    """
    problem = _CurvatureProblem(db)
    if action_dissipation_check(db, lam_max, trials, seed, problem).passed:
        return lam_max
    lo, hi = 0.0, lam_max
    for _ in range(iterations):
        mid = (lo + hi) / 2
        if action_dissipation_check(db, mid, trials, seed, problem).passed:
            lo = mid
        else:
            hi = mid
    return lo


# -- entropy decay ----------------------------------------------------------


class DecayRow(NamedTuple):
    t: float
    entropy: float
    envelope: float
    slack: float
    trace_distance: float
    pinsker_bound: float


@dataclass
class DecayReport:
    lam: float
    rows: list
    monotone: bool

    @property
    def passed(self) -> bool:
        return self.monotone and all(r.slack >= -DECAY_TOL for r in self.rows) and all(
            r.trace_distance <= r.pinsker_bound + 1e-6 for r in self.rows
        )


def evolve(db: DBGenerator, rho, t: float) -> np.ndarray:
    n = db.n
    out = unvec(semigroup_superop(db.superop(), t).conj().T @ vec(np.asarray(rho, complex)), (n, n))
    return (out + out.conj().T) / 2


def decay_check(db: DBGenerator, lam: float, rho0, t_grid=(0.1, 0.25, 0.5, 1.0, 2.0, 3.0)) -> DecayReport:
    """Compare ``D(P_t^dag rho0 || sigma)`` with ``e^(-2 lam t) D(rho0 || sigma)``."""
    rho0 = np.asarray(rho0, complex)
    D0 = relative_entropy(rho0, db.sigma)
    rows = []
    for t in sorted(t_grid):
        rt = evolve(db, rho0, t)
        D = relative_entropy(rt, db.sigma)
        env = float(np.exp(-2 * lam * t) * D0)
        rows.append(DecayRow(float(t), D, env, env - D, trace_distance(rt, db.sigma), float(np.sqrt(2 * env))))
    values = [D0] + [r.entropy for r in rows]
    monotone = all(b <= a + DECAY_TOL for a, b in zip(values, values[1:]))
    return DecayReport(lam, rows, monotone)


def lsi_slack(db: DBGenerator, lam: float, rho) -> float:
    """``-(1/2 lam) Tr[L^dag rho (log rho - log sigma)] - D(rho || sigma)``."""
    if lam <= 0:
        raise InvalidInput("lambda must be positive")
    return transport.entropy_production(db, rho) / (2 * lam) - relative_entropy(rho, db.sigma)


def lsi_check(db: DBGenerator, lam: float, trials: int = 100, seed=0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = np.inf
    log = []
    for k in range(trials):
        rho, rank, eps = sample_strict_state(db.n, rng)
        s = lsi_slack(db, lam, rho)
        log.append(TrialRecord(k, 0.0, rank, eps, float("nan"), s))
        worst = min(worst, s)
    return CheckResult("lsi", lam, trials, seed, worst, worst >= -LSI_TOL, log)


def energy(db: DBGenerator, rho) -> float:
    """``g_rho(L^dag rho, L^dag rho)``."""
    return transport.metric_eval(db, rho, db.apply_dagger(rho))


def energy_decay(db: DBGenerator, lam: float, rho0, t_grid=(0.1, 0.5, 1.0, 2.0)) -> list[tuple[float, float, float]]:
    """Rows ``(t, E(t), e^(-2 lam t) E(0))``."""
    E0 = energy(db, rho0)
    return [(float(t), energy(db, evolve(db, rho0, t)), float(np.exp(-2 * lam * t) * E0)) for t in t_grid]


# -- certificates -----------------------------------------------------------


@dataclass
class DecayCertificate:
    db: DBGenerator
    lam: float
    evidence: str  # commutator_rates | sampled_gradient_estimate | sampled_action_dissipation
    rates: list | None = None
    log: list = field(default_factory=list, repr=False)


def certify(db: DBGenerator, lam: float | None = None, trials: int = 200, seed=0) -> DecayCertificate:
    """Certificate from uniform commutator rates when available, else a sampled gradient estimate at ``lam``."""
    rates = commutator_rates(db)
    if isinstance(rates, RateCertificate) and rates.certifies and (lam is None or lam <= rates.lam):
        return DecayCertificate(db, rates.lam, "commutator_rates", [r.a for r in rates.rows])
    if lam is None:
        raise InvalidInput("no commutator-rate certificate; give a lambda to test by sampling")
    res = gradient_estimate_check(db, lam, trials, seed)
    if not res.passed:
        raise InvalidInput(f"gradient estimate fails at lambda={lam} (worst slack {res.worst_slack:.3e})")
    return DecayCertificate(db, lam, "sampled_gradient_estimate", None, res.log)


# -- depolarizing example -----------------------------------------------------


def symmetric_entropy_residual(db: DBGenerator, rho) -> float:
    """``|entropy production - D(rho||tau) - D(tau||rho)|`` (an identity for depolarizing noise)."""
    tau = db.sigma
    return abs(transport.entropy_production(db, rho) - relative_entropy(rho, tau) - relative_entropy(tau, rho))


def entropy_production_fd(db: DBGenerator, rho, h: float = 1e-4) -> float:
    """Five-point central difference of ``t -> D(P_t^dag rho || sigma)`` at ``t = 0``.

    ``h`` is measured in units of the fastest relaxation time, so the actual
    step is ``h / max(1, |L|_2)``.  The backward points use ``e^(-hL)``, which
    keeps a strict ``rho`` positive for small ``h``.
    """
    from scipy.linalg import expm

    n = db.n
    L = db.superop()
    h = h / max(1.0, float(np.linalg.norm(L, 2)))
    rho = np.asarray(rho, complex)

    def D(t):
        r = unvec(expm(t * L).conj().T @ vec(rho), (n, n))
        return relative_entropy((r + r.conj().T) / 2, db.sigma)

    return (D(-2 * h) - 8 * D(-h) + 8 * D(h) - D(2 * h)) / (12 * h)
