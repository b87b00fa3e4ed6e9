"""Acceptance criteria, one test each.

Every test prints a single ``[ACCEPT n] PASS|FAIL`` line with the measured
quantities, then asserts at the stated tolerance.
"""

import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from qms import channels, convexity, lindblad, monotone, transport
from qms.entropy import relative_entropy, trace_distance
from qms.matcore import random_cptp, random_density, superop_lr


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\n[ACCEPT {k:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return emit


def test_1_dpi_suite(report):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = np.inf
    for _ in range(200):
        n = int(rng.integers(2, 7))
        n_out = int(rng.integers(1, 7))
        r = int(rng.integers(-(-n // n_out), n * n_out + 1))
        ch = random_cptp(n, n_out, r, seed=rng)
        rho = random_density(n, strict=True, seed=rng)
        sigma = random_density(n, strict=True, seed=rng)
        worst = min(worst, channels.dpi_check(ch, rho, sigma).slack)
    elapsed = time.perf_counter() - start
    ok = worst >= -1e-9 and elapsed < 10
    report(1, ok, f"DPI worst slack {worst:.3e} over 200 trials, {elapsed:.2f}s")
    assert ok


def test_2_pinsker_suite(report):
    rng = np.random.default_rng(2)
    worst = np.inf
    for _ in range(200):
        n = int(rng.integers(2, 7))
        rho = random_density(n, strict=True, seed=rng)
        sigma = random_density(n, strict=True, seed=rng)
        worst = min(worst, relative_entropy(rho, sigma) - 0.5 * trace_distance(rho, sigma) ** 2)
    ok = worst >= -1e-9
    report(2, ok, f"Pinsker worst slack {worst:.3e} over 200 pairs")
    assert ok


def test_3_choi_cp(report):
    res = channels.is_completely_positive(channels.transpose_map(2))
    worst = 0.0
    for s in range(50):
        ch = random_cptp(3, 3, 1 + s % 4, seed=s).adjoint()
        cp = channels.is_completely_positive(ch)
        rebuilt = sum(superop_lr(V.conj().T, V) for V in cp.kraus)
        worst = max(worst, float(np.max(np.abs(rebuilt - ch.superop()))))
    ok = (not res.is_cp) and res.min_eigenvalue < 0 and worst <= 1e-9
    report(3, ok, f"transpose min eig {res.min_eigenvalue:.3f}; round-trip residual {worst:.2e} on 50 channels")
    assert ok


def test_4_monotonicity_theorems(report):
    start = time.perf_counter()
    rows = monotone.monotonicity_suite(trials=200, seed=4, ts=(0.25, 0.5, 0.75))
    elapsed = time.perf_counter() - start
    worst = {th: min(r.slack for r in rows if r.theorem == th) for th in monotone.THEOREMS}
    counts = {th: sum(r.theorem == th for r in rows) for th in monotone.THEOREMS}
    l1 = [r.passed for r in rows if r.theorem == "L1M"]
    l2 = [r.passed for r in rows if r.theorem == "L2M"]
    ok = all(v >= -1e-8 for v in worst.values()) and all(c == 200 for c in counts.values()) and l1 == l2 and elapsed < 30
    detail = ", ".join(f"{th} {worst[th]:.2e}" for th in monotone.THEOREMS)
    report(4, ok, f"worst slacks {detail}; L1M/L2M agree={l1 == l2}; {elapsed:.2f}s")
    assert ok


def test_5_alicki_round_trip(report):
    rng = np.random.default_rng(5)
    rec = clo = gns = bkm = 0.0
    for k in range(50):
        n = 2 + k % 3
        src = lindblad.random_db_generator(n, seed=rng)
        L = src.superop()
        db = lindblad.alicki_decompose(L, src.sigma)
        rec = max(rec, lindblad.reconstruction_residual(db, L))
        for j, p in enumerate(db.pairing()):
            clo = max(clo, float(np.max(np.abs(db.V[p] - db.V[j].conj().T))), abs(db.omegas[p] + db.omegas[j]))
        gns = max(gns, lindblad.db_check_gns(db, db.sigma).residual)
        bkm = max(bkm, lindblad.bkm_selfadjoint_check(L, src.sigma))
    ok = rec <= 1e-8 and clo <= 1e-8 and gns <= 1e-10 and bkm <= 1e-8
    report(5, ok, f"reconstruction {rec:.1e}, closure {clo:.1e}, GNS {gns:.1e}, BKM {bkm:.1e} on 50 generators")
    assert ok


def test_6_chain_rule_gradient_flow(report):
    rng = np.random.default_rng(6)
    chain = flow = 0.0
    for k in range(100):
        n = 2 + k % 3
        db = lindblad.random_db_generator(n, seed=rng)
        rho = random_density(n, strict=True, seed=rng)
        chain = max(chain, transport.chain_rule_residual(db, rho))
        flow = max(flow, transport.gradflow_residual(db, rho))
    ok = chain <= 1e-8 and flow <= 1e-8
    report(6, ok, f"chain rule {chain:.1e}, gradient flow {flow:.1e} on 100 instances")
    assert ok


def test_7_depolarizing_certificate(report):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    parts = []
    ok = True
    for n in (2, 3, 4):
        db = lindblad.depolarizing_db(n)
        L = lindblad.depolarizing_generator(n).L
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        cf = max(
            float(np.max(np.abs(lindblad.semigroup_apply(L, t, A) - lindblad.depolarizing_closed_form(n, t, A))))
            for t in (0.1, 0.5, 1.0, 2.0, 5.0)
        )
        sym = max(convexity.symmetric_entropy_residual(db, random_density(n, True, seed=rng)) for _ in range(20))
        problem = convexity._CurvatureProblem(db)
        ge5 = convexity.gradient_estimate_check(db, 0.5, 200, 0, problem)
        ad5 = convexity.action_dissipation_check(db, 0.5, 200, 0, problem)
        ge6 = convexity.gradient_estimate_check(db, 0.6, 200, 0, problem)
        ad6 = convexity.action_dissipation_check(db, 0.6, 200, 0, problem)
        rho0 = np.diag(np.r_[0.9, np.full(n - 1, 0.1 / (n - 1))])
        dec = convexity.decay_check(db, 0.5, rho0, (0.1, 0.25, 0.5, 1.0, 2.0, 3.0))
        sub = {
            "i": cf <= 1e-10,
            "ii": sym <= 1e-10,
            "iii@0.5": ge5.passed and ad5.passed,
            "iii@0.6": (not ge6.passed) and (not ad6.passed),
            "iv": dec.passed,
        }
        ok &= all(sub.values())
        bad = [k for k, v in sub.items() if not v]
        parts.append(
            f"n={n}: cf {cf:.0e}, sym {sym:.0e}, GE/AD@0.6 worst {ge6.worst_slack:+.2e}/{ad6.worst_slack:+.2e}"
            + (f" [failed {','.join(bad)}]" if bad else "")
        )
    elapsed = time.perf_counter() - start
    ok &= elapsed < 20
    report(7, ok, "; ".join(parts) + f"; {elapsed:.2f}s")
    assert ok


def test_8_geodesic_solver(report):
    db = lindblad.depolarizing_db(2)
    r0, r1 = np.diag([0.8, 0.2]), np.diag([0.2, 0.8])
    times = []

    def timed(*args, **kw):
        t0 = time.perf_counter()
        out = transport.geodesic_distance(db, *args, **kw)
        times.append(time.perf_counter() - t0)
        return out

    _, self_path = timed(r0, r0)
    d16, _ = timed(r0, r1, m=16)
    d16b, _ = timed(r1, r0, m=16)
    d32, _ = timed(r0, r1, m=32)
    oracle = transport.two_point_oracle(0.8, 0.2, m=400)
    rel_oracle = abs(d16 - oracle) / oracle
    rel_refine = abs(d32 - d16) / d16
    ok = (
        self_path.action <= 1e-10
        and abs(d16 - d16b) <= 2e-3
        and rel_oracle <= 1e-3
        and rel_refine <= 1e-2
        and max(times) < 60
    )
    report(8, ok, f"self action {self_path.action:.1e}, asym {abs(d16 - d16b):.1e}, d16 {d16:.6f} vs oracle "
                  f"{oracle:.6f} (rel {rel_oracle:.1e}), 16->32 rel {rel_refine:.1e}, max {max(times):.2f}s")
    assert ok


def test_9_entropy_production(report):
    rng = np.random.default_rng(9)
    worst = 0.0
    for k in range(50):
        n = 2 + k % 3
        db = lindblad.random_db_generator(n, seed=rng)
        rho = random_density(n, strict=True, seed=rng)
        ld = db.apply_dagger(rho)
        g = transport.metric_eval(db, rho, (ld + ld.conj().T) / 2)
        worst = max(worst, abs(convexity.entropy_production_fd(db, rho, h=1e-4) + g))
    ok = worst <= 1e-5
    report(9, ok, f"finite-difference vs metric worst error {worst:.2e} on 50 instances")
    assert ok


def test_10_full_suite(report, tmp_path):
    exe = shutil.which("qms")
    cmd = [exe] if exe else [sys.executable, "-m", "qms.cli"]
    start = time.perf_counter()
    proc = subprocess.run(cmd + ["run", "--suite", "all", "--out", str(tmp_path)], capture_output=True, text=True)
    elapsed = time.perf_counter() - start
    ok = proc.returncode == 0 and elapsed < 180
    report(10, ok, f"qms run --suite all exit {proc.returncode} in {elapsed:.1f}s")
    assert ok, proc.stderr[-2000:]
