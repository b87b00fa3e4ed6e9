"""Entropies, divergences and the sigma-weighted inner products.

Logarithms are natural.  Relative entropy returns ``math.inf`` when the
support condition fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidInput, SingularMatrix
from .matcore import eigh, hermitian

KERNEL_TOL = 1e-10


def von_neumann(rho) -> float:
    """``-Tr[rho log rho]`` with ``0 log 0 = 0``."""
    p = np.clip(np.linalg.eigvalsh(hermitian(rho)), 0.0, None)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def _support_split(sigma, tol):
    w, U = eigh(sigma)
    cut = tol * max(1.0, float(w[-1]))
    return w, U, w > cut


def relative_entropy(rho, sigma) -> float:
    """Umegaki relative entropy ``Tr[rho (log rho - log sigma)]``."""
    rho = hermitian(rho)
    ws, Us, on = _support_split(sigma, KERNEL_TOL)
    # weight of rho on ker(sigma)
    P_ker = Us[:, ~on]
    if P_ker.shape[1] and np.trace(P_ker.conj().T @ rho @ P_ker).real > KERNEL_TOL:
        return math.inf
    log_sigma = (Us[:, on] * np.log(ws[on])) @ Us[:, on].conj().T
    cross = float(np.real(np.trace(rho @ log_sigma)))
    return max(-von_neumann(rho) - cross, 0.0)


def bs_relative_entropy(rho, sigma) -> float:
    """Belavkin-Staszewski divergence ``Tr[rho log(rho^1/2 sigma^-1 rho^1/2)]``."""
    rho = hermitian(rho)
    ws, Us = eigh(sigma)
    if ws[0] <= KERNEL_TOL:
        raise SingularMatrix("Belavkin-Staszewski entropy needs an invertible sigma")
    wr, Ur = eigh(rho)
    r_half = (Ur * np.sqrt(np.clip(wr, 0, None))) @ Ur.conj().T
    M = r_half @ (Us / ws) @ Us.conj().T @ r_half
    wm, Um = eigh((M + M.conj().T) / 2)
    cut = KERNEL_TOL * max(1.0, float(wm[-1]))
    logm = np.zeros_like(wm)
    logm[wm > cut] = np.log(wm[wm > cut])
    return float(np.real(np.trace(rho @ ((Um * logm) @ Um.conj().T))))


def trace_distance(rho, sigma) -> float:
    """``Tr|rho - sigma|`` (no factor 1/2)."""
    return float(np.sum(np.abs(np.linalg.eigvalsh(hermitian(rho) - hermitian(sigma)))))


@dataclass(frozen=True)
class MWeight:
    """Probability measure ``m`` on [0, 1] selecting ``M_m(B) = int sigma^s B sigma^(1-s) dm``."""

    kind: str
    atoms: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        if self.kind not in ("GNS", "KMS", "BKM", "discrete"):
            raise InvalidInput(f"unknown weight kind {self.kind!r}")
        if self.kind == "discrete":
            if not self.atoms:
                raise InvalidInput("discrete weight needs atoms")
            if any(not 0 <= s <= 1 or w <= 0 for s, w in self.atoms):
                raise InvalidInput("atoms need s in [0,1] and positive weight")
            if abs(sum(w for _, w in self.atoms) - 1) > 1e-12:
                raise InvalidInput("atom weights must sum to 1")

    def point_masses(self):
        if self.kind == "GNS":
            return ((0.0, 1.0),)
        if self.kind == "KMS":
            return ((0.5, 1.0),)
        return self.atoms


GNS = MWeight("GNS")
KMS = MWeight("KMS")
BKM = MWeight("BKM")


def m_kernel(lam, m: MWeight) -> np.ndarray:
    """Entrywise weights ``w_ij`` of ``M_m`` in the eigenbasis of sigma."""
    li = lam[:, None]
    lj = lam[None, :]
    if m.kind == "BKM":
        return _kernels.logmean(li, lj)
    w = np.zeros((lam.size, lam.size))
    for s, weight in m.point_masses():
        w += weight * li**s * lj ** (1 - s)
    return w


def _strict_eigh(sigma, what="sigma"):
    w, U = eigh(sigma)
    if w[0] <= KERNEL_TOL:
        raise SingularMatrix(f"{what} must be strictly positive (min eigenvalue {w[0]:.3e})")
    return w, U


def m_operator(sigma, m: MWeight, B) -> np.ndarray:
    w, U = _strict_eigh(sigma)
    return _kernels.frame_multiplier(U, U, m_kernel(w, m), np.asarray(B, complex))


def m_inner(sigma, m: MWeight, A, B) -> complex:
    """``<A, B>_m = Tr[A^* M_m(B)]``."""
    return complex(np.vdot(np.asarray(A, complex), m_operator(sigma, m, B)))


def d_rho(rho, A) -> np.ndarray:
    """Frechet derivative of ``log`` at ``rho`` in direction ``A``."""
    w, U = _strict_eigh(rho, "rho")
    k = _kernels.log_divided_difference(w[:, None], w[None, :])
    return _kernels.frame_multiplier(U, U, k, np.asarray(A, complex))


def d_rho_inverse(rho, A) -> np.ndarray:
    """Inverse of :func:`d_rho`: ``int_0^1 rho^(1-t) A rho^t dt``."""
    w, U = _strict_eigh(rho, "rho")
    k = _kernels.logmean(w[:, None], w[None, :])
    return _kernels.frame_multiplier(U, U, k, np.asarray(A, complex))
