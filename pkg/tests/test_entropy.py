import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qms import entropy as E
from qms.matcore import random_density, random_unitary
from qms.errors import InvalidInput, SingularMatrix

from conftest import rand_herm, rand_matrix

seeds = st.integers(0, 2**32 - 1)

# classical oracles, evaluated by hand on the eigenvalue vectors
VN_075 = 0.562335  # -(0.75 log 0.75 + 0.25 log 0.25)
KL_075_HALF = 0.130812  # 0.75 log 1.5 + 0.25 log 0.5


def test_von_neumann_examples():
    assert E.von_neumann(np.diag([1.0, 0.0])) == 0.0
    for n in (2, 3, 5):
        assert math.isclose(E.von_neumann(np.eye(n) / n), math.log(n), rel_tol=1e-12)
    assert abs(E.von_neumann(np.diag([0.75, 0.25])) - VN_075) < 5e-7


def test_relative_entropy_examples(rng):
    rho = random_density(3, seed=4)
    assert abs(E.relative_entropy(rho, rho)) < 1e-10
    assert abs(E.relative_entropy(np.diag([0.75, 0.25]), np.eye(2) / 2) - KL_075_HALF) < 5e-7
    assert abs(E.relative_entropy(np.diag([1.0, 0.0]), np.eye(2) / 2) - math.log(2)) < 1e-12


def test_relative_entropy_infinite_on_support_mismatch():
    assert E.relative_entropy(np.eye(2) / 2, np.diag([1.0, 0.0])) == math.inf
    # support contained: finite
    assert math.isfinite(E.relative_entropy(np.diag([1.0, 0.0]), np.diag([0.5, 0.5])))


def test_bs_relative_entropy():
    rho = random_density(3, strict=True, seed=1)
    assert abs(E.bs_relative_entropy(rho, rho)) < 1e-10
    p, q = np.diag([0.6, 0.3, 0.1]), np.diag([0.2, 0.5, 0.3])
    assert abs(E.bs_relative_entropy(p, q) - E.relative_entropy(p, q)) < 1e-9
    with pytest.raises(SingularMatrix):
        E.bs_relative_entropy(rho, np.diag([1.0, 0.0, 0.0]))


def test_bs_versus_umegaki_recorded():
    # the ordering is recorded over samples, not asserted as a theorem
    gaps = []
    for s in range(20):
        rho = random_density(3, strict=True, seed=s)
        sigma = random_density(3, strict=True, seed=100 + s)
        gaps.append(E.bs_relative_entropy(rho, sigma) - E.relative_entropy(rho, sigma))
    assert np.all(np.isfinite(gaps))
    assert min(gaps) >= -1e-9


def test_trace_distance_examples():
    rho = random_density(3, seed=2)
    assert E.trace_distance(rho, rho) < 1e-14
    assert math.isclose(E.trace_distance(np.diag([1.0, 0]), np.diag([0, 1.0])), 2.0)
    assert math.isclose(E.trace_distance(np.diag([0.75, 0.25]), np.eye(2) / 2), 0.5)


@given(seeds, st.integers(2, 6))
def test_pinsker_and_klein(seed, n):
    rng = np.random.default_rng(seed)
    rho = random_density(n, strict=True, seed=rng)
    sigma = random_density(n, strict=True, seed=rng)
    D = E.relative_entropy(rho, sigma)
    assert D >= 0
    assert D >= 0.5 * E.trace_distance(rho, sigma) ** 2 - 1e-9


@given(seeds, st.integers(2, 4))
def test_unitary_invariance(seed, n):
    rng = np.random.default_rng(seed)
    rho = random_density(n, strict=True, seed=rng)
    sigma = random_density(n, strict=True, seed=rng)
    U = random_unitary(n, rng)
    a = E.relative_entropy(U @ rho @ U.conj().T, U @ sigma @ U.conj().T)
    assert abs(a - E.relative_entropy(rho, sigma)) < 1e-10


def test_m_inner_scalar_sigma(rng):
    A, B = rand_matrix(rng, 3), rand_matrix(rng, 3)
    for m in (E.GNS, E.KMS, E.BKM):
        assert abs(E.m_inner(np.eye(3) / 3, m, A, B) - np.vdot(A, B) / 3) < 1e-12
        assert abs(E.m_inner(random_density(3, True, seed=3), m, np.eye(3), np.eye(3)) - 1) < 1e-12


def test_m_inner_closed_forms_against_quadrature():
    sigma = np.diag([0.9, 0.1])
    A = np.array([[0.3, 1.0 - 0.5j], [0.2j, -0.7]])
    B = np.array([[1.0, 0.4], [-0.6j, 0.5 + 0.1j]])
    gns = np.trace(A.conj().T @ B @ sigma)
    s_half = np.diag(np.sqrt([0.9, 0.1]))
    kms = np.trace(A.conj().T @ s_half @ B @ s_half)
    assert abs(E.m_inner(sigma, E.GNS, A, B) - gns) < 1e-12
    assert abs(E.m_inner(sigma, E.KMS, A, B) - kms) < 1e-12
    assert abs(gns - kms) > 1e-3
    # 64-point Gauss-Legendre oracle for the uniform measure
    x, w = np.polynomial.legendre.leggauss(64)
    s, w = (x + 1) / 2, w / 2
    lam = np.array([0.9, 0.1])
    quad = sum(
        wk * np.trace(A.conj().T @ np.diag(lam**sk) @ B @ np.diag(lam ** (1 - sk))) for sk, wk in zip(s, w)
    )
    assert abs(E.m_inner(sigma, E.BKM, A, B) - quad) < 1e-8
    disc = E.MWeight("discrete", ((0.0, 0.5), (1.0, 0.5)))
    oracle = 0.5 * gns + 0.5 * np.trace(A.conj().T @ sigma @ B)
    assert abs(E.m_inner(sigma, disc, A, B) - oracle) < 1e-12


def test_mweight_validation():
    with pytest.raises(InvalidInput):
        E.MWeight("discrete", ((0.2, 0.5),))
    with pytest.raises(InvalidInput):
        E.MWeight("nonsense")
    with pytest.raises(SingularMatrix):
        E.m_inner(np.diag([1.0, 0.0]), E.GNS, np.eye(2), np.eye(2))


@given(seeds, st.integers(2, 4))
def test_m_inner_positive_and_bkm_identity(seed, n):
    rng = np.random.default_rng(seed)
    sigma = random_density(n, strict=True, seed=rng)
    A, B = rand_matrix(rng, n), rand_matrix(rng, n)
    for m in (E.GNS, E.KMS, E.BKM):
        assert E.m_inner(sigma, m, A, A).real > 0
    assert abs(E.m_inner(sigma, E.BKM, A, B) - np.vdot(A, E.d_rho_inverse(sigma, B))) < 1e-10


def test_d_rho_commuting_case():
    rho = np.diag([0.7, 0.2, 0.1])
    A = np.diag([1.0, -2.0, 0.5])
    assert np.allclose(E.d_rho(rho, A), np.linalg.inv(rho) @ A)


@given(seeds, st.integers(2, 4))
def test_d_rho_round_trip(seed, n):
    rng = np.random.default_rng(seed)
    rho = random_density(n, strict=True, seed=rng)
    A = rand_herm(rng, n)
    assert np.allclose(E.d_rho_inverse(rho, E.d_rho(rho, A)), A, atol=1e-9)
    assert np.allclose(E.d_rho(rho, E.d_rho_inverse(rho, A)), A, atol=1e-9)


def test_d_rho_is_entropy_hessian(rng):
    rho = random_density(3, strict=True, seed=8, eps=0.2)
    A = rand_herm(rng, 3)
    A -= np.trace(A) / 3 * np.eye(3)
    A *= 0.1 / np.abs(A).max()

    def f(t):
        X = rho + t * A
        w, U = np.linalg.eigh(X)
        return float(np.sum(w * np.log(w)))

    h = 1e-4
    fd = (f(h) - 2 * f(0) + f(-h)) / h**2
    assert abs(np.vdot(A, E.d_rho(rho, A)).real - fd) < 1e-5
