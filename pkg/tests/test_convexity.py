import numpy as np
import pytest
from hypothesis import given, strategies as st

from qms import convexity as C
from qms import transport as T
from qms.entropy import relative_entropy
from qms.errors import InvalidInput, NotErgodic
from qms.lindblad import (
    DBGenerator,
    depolarizing_closed_form,
    depolarizing_db,
    random_db_generator,
    semigroup_apply,
    thermal_qubit_db,
)
from qms.matcore import commutator_superop, random_density

from conftest import rand_herm, rand_matrix

seeds = st.integers(0, 2**32 - 1)


def test_intertwiner_identity_at_zero():
    db = random_db_generator(3, seed=2)
    _, E = C._gradient_basis(db)
    assert np.allclose(C.intertwiner(db, 0.0) @ E, E, atol=1e-9)
    with pytest.raises(InvalidInput):
        C.intertwiner(db, -1.0)


def test_intertwiner_depolarizing(rng):
    db = depolarizing_db(3)
    A = rand_matrix(rng, 3)
    gA = T.stack(T.gradient(db, A))
    for t in (0.3, 1.0):
        assert np.allclose(C.intertwiner(db, t) @ gA, np.exp(-t) * gA, atol=1e-10)


@given(seeds, st.integers(2, 3))
def test_intertwining_and_semigroup_law(seed, n):
    rng = np.random.default_rng(seed)
    db = random_db_generator(n, seed=rng)
    A = rand_matrix(rng, n)
    t = 0.4
    lhs = T.stack(T.gradient(db, semigroup_apply(db, t, A)))
    assert np.max(np.abs(lhs - C.intertwiner(db, t) @ T.stack(T.gradient(db, A)))) <= 1e-9
    Q3, Q7, Q1 = (C.intertwiner(db, s) for s in (0.3, 0.7, 1.0))
    assert np.max(np.abs(Q3 @ Q7 - Q1)) <= 1e-9


def test_intertwiner_not_ergodic():
    db = DBGenerator(np.eye(2) / 2, [(np.diag([1.0, -1.0]), 0.0)])
    with pytest.raises(NotErgodic):
        C._gradient_basis(db)
    with pytest.raises(NotErgodic):
        C.action_dissipation_check(db, 0.0, trials=1)


def test_commutator_rates_depolarizing_is_zero():
    cert = C.commutator_rates(depolarizing_db(2))
    assert isinstance(cert, C.RateCertificate)
    assert all(abs(r.a) < 1e-12 and r.residual < 1e-12 for r in cert.rows)
    assert cert.lam == pytest.approx(0.0, abs=1e-12) and not cert.certifies


@pytest.mark.parametrize("a", [0.3, 1.0, 2.5])
def test_fit_commutator_rate_synthetic(a):
    V = np.array([[0, 1], [0, 0]], complex)  # [V, H] = V for H = diag(0, 1)
    H = np.diag([0.0, 1.0])
    D = commutator_superop(V)
    L = -a * commutator_superop(H)
    fitted, residual, accepted = C.fit_commutator_rate(D, L)
    assert accepted and abs(fitted - a) <= 1e-9 and residual <= 1e-12


def test_commutator_rates_generic_report():
    rates = C.commutator_rates(random_db_generator(3, seed=1))
    assert isinstance(rates, C.NoUniformRates)
    assert rates.worst.residual > 1e-6
    assert isinstance(C.commutator_rates(thermal_qubit_db()), C.NoUniformRates)


def test_sample_strict_state(rng):
    for _ in range(20):
        rho, k, eps = C.sample_strict_state(3, rng)
        assert 1 <= k <= 3 and 1e-3 <= eps <= 1
        assert abs(np.trace(rho) - 1) < 1e-12
        assert np.linalg.eigvalsh(rho)[0] >= eps / 3 * (1 - 1e-9)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_depolarizing_passes_at_half(n):
    db = depolarizing_db(n)
    ad = C.action_dissipation_check(db, 0.5, trials=200, seed=0)
    ge = C.gradient_estimate_check(db, 0.5, trials=200, seed=0)
    assert ad.passed and ge.passed
    assert ad.trials == 200 and len(ad.log) == 200


@pytest.mark.parametrize("db", [depolarizing_db(2), depolarizing_db(3), thermal_qubit_db(1.0), thermal_qubit_db(2.5)])
def test_zero_curvature_on_intertwining_generators(db):
    assert C.action_dissipation_check(db, 0.0, trials=80, seed=1).passed
    assert C.gradient_estimate_check(db, 0.0, trials=80, seed=1).passed


@pytest.mark.parametrize("lam", [0.0, 0.5, 0.6, 1.5, 3.0])
@pytest.mark.parametrize("db", [depolarizing_db(2), depolarizing_db(3), thermal_qubit_db(1.0), random_db_generator(3, seed=0)])
def test_duality_agreement(db, lam):
    ad = C.action_dissipation_check(db, lam, trials=40, seed=3)
    ge = C.gradient_estimate_check(db, lam, trials=40, seed=3)
    assert ad.passed == ge.passed


def test_large_lambda_fails():
    db = depolarizing_db(2)
    assert not C.action_dissipation_check(db, 3.0, trials=40, seed=0).passed
    assert not C.gradient_estimate_check(db, 3.0, trials=40, seed=0).passed


def test_gradient_estimate_value(rng):
    db = depolarizing_db(3)
    rho = random_density(3, True, seed=1)
    assert C.gradient_estimate_value(db, 0.5, rho, 2.0 * np.eye(3), 0.7) == 0.0
    Y = rand_herm(rng, 3)
    assert C.gradient_estimate_value(db, 0.5, rho, Y, 0.4) >= -1e-9


def test_gradient_estimate_value_bounded_by_sampled_check(rng):
    # the exact worst case over fields dominates every explicit observable
    db = random_db_generator(3, seed=5)
    prob = C._CurvatureProblem(db)
    rho = random_density(3, True, seed=6)
    t = 0.4
    mu = prob.mu(rho, t)
    for _ in range(20):
        Y = rand_herm(rng, 3)
        gY = T.gradient(db, Y)
        rho_t = C.evolve(db, rho, t)
        base = np.vdot(gY, T.m_rho_apply(db, rho_t, gY)).real
        val = C.gradient_estimate_value(db, 0.0, rho, Y, t)
        assert val >= base * (1 - mu) - 1e-9 * max(1, base)


def test_empirical_lambda_depolarizing():
    lam = C.empirical_lambda(depolarizing_db(2), trials=40, iterations=12)
    assert 0.5 <= lam <= 1.2


def test_decay_depolarizing_qubit():
    db = depolarizing_db(2)
    rho0 = np.diag([0.9, 0.1])
    rep = C.decay_check(db, 0.5, rho0)
    assert rep.passed and rep.monotone
    assert [r.t for r in rep.rows] == [0.1, 0.25, 0.5, 1.0, 2.0, 3.0]
    zero = C.decay_check(db, 0.5, db.sigma)
    assert all(abs(r.entropy) < 1e-12 for r in zero.rows)
    far = C.decay_check(db, 0.5, rho0, t_grid=(40.0,))
    assert far.rows[0].entropy <= 1e-8


@pytest.mark.parametrize("n", [2, 3, 4])
def test_depolarizing_closed_form_and_symmetric_identity(n):
    db = depolarizing_db(n)
    rng = np.random.default_rng(n)
    for s in range(10):
        rho = random_density(n, True, seed=rng)
        assert C.symmetric_entropy_residual(db, rho) <= 1e-10
        for t in (0.2, 1.0, 3.0):
            assert np.max(np.abs(C.evolve(db, rho, t) - depolarizing_closed_form(n, t, rho))) <= 1e-10
        slack = C.lsi_slack(db, 0.5, rho)
        assert abs(slack - relative_entropy(db.sigma, rho)) <= 1e-10


def test_lsi_examples():
    db = depolarizing_db(3)
    assert abs(C.lsi_slack(db, 0.5, db.sigma)) < 1e-12
    assert C.lsi_check(db, 0.5, trials=100, seed=0).passed
    with pytest.raises(InvalidInput):
        C.lsi_slack(db, 0.0, db.sigma)


def test_energy_decay_depolarizing():
    for n in (2, 3):
        db = depolarizing_db(n)
        for t, E, bound in C.energy_decay(db, 0.5, random_density(n, True, seed=n)):
            assert E <= bound + 1e-7


def test_pinsker_along_flow():
    db = depolarizing_db(3)
    rep = C.decay_check(db, 0.5, random_density(3, True, seed=4))
    assert all(r.trace_distance <= r.pinsker_bound + 1e-6 for r in rep.rows)


def test_certify_paths():
    cert = C.certify(depolarizing_db(2), 0.5, trials=50)
    assert cert.evidence == "sampled_gradient_estimate" and cert.lam == 0.5
    with pytest.raises(InvalidInput):
        C.certify(depolarizing_db(2))
    with pytest.raises(InvalidInput):
        C.certify(depolarizing_db(2), 3.0, trials=40)


def test_certificate_soundness_chain():
    # whenever commutator rates certify lambda > 0, the downstream checks pass
    for seed in range(10):
        db = random_db_generator(2, seed=seed)
        rates = C.commutator_rates(db)
        if not (isinstance(rates, C.RateCertificate) and rates.certifies):
            continue
        lam = rates.lam
        assert C.action_dissipation_check(db, lam, trials=50, seed=seed).passed
        assert C.decay_check(db, lam, random_density(2, True, seed=seed)).passed
        assert C.lsi_check(db, lam, trials=50, seed=seed).passed


@given(seeds, st.integers(2, 4))
def test_entropy_production_finite_difference(seed, n):
    rng = np.random.default_rng(seed)
    db = random_db_generator(n, seed=rng)
    rho = random_density(n, True, seed=rng)
    ld = db.apply_dagger(rho)
    g = T.metric_eval(db, rho, (ld + ld.conj().T) / 2)
    assert abs(C.entropy_production_fd(db, rho) + g) <= 1e-5
