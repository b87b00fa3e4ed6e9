"""Command-line harness: ``qms run | certify | decompose | geodesic | flow``.

Every subcommand writes ``report.csv`` (one row per check instance) and
``summary.json`` into ``--out``.  Exit status is 0 when every asserted
check passes, 2 when one fails, and 1 on I/O or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import channels, convexity, entropy, lindblad, monotone, transport
from .errors import BlockLeakage, NotDetailedBalance, QMSError
from .matcore import matrix_from_json, matrix_to_json, random_cptp, random_density, superop_from_map

log = logging.getLogger("qms")

SUITES = ("entropy", "channels", "monotone", "lindblad", "transport", "convexity")
CSV_FIELDS = ("instance_id", "check", "lambda", "trials", "worst_slack", "pass")

DEFAULT_TOLERANCES = {
    "dpi": 1e-9,
    "pinsker": 1e-9,
    "choi": 1e-9,
    "monotone": 1e-8,
    "residual": 1e-8,
    "selfadjoint": 1e-10,
    "curvature": convexity.CHECK_TOL,
    "decay": convexity.DECAY_TOL,
    "geodesic": 1e-3,
}

EXIT_OK, EXIT_IO, EXIT_FAIL = 0, 1, 2


class ConfigError(Exception):
    pass


@dataclass
class Row:
    instance_id: str
    check: str
    lam: float | None
    trials: int
    worst_slack: float
    passed: bool | None  # None marks a recorded value that is not asserted

    def as_csv(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "check": self.check,
            "lambda": "" if self.lam is None else f"{self.lam:.6g}",
            "trials": self.trials,
            "worst_slack": f"{self.worst_slack:.6e}",
            "pass": "info" if self.passed is None else ("PASS" if self.passed else "FAIL"),
        }


@dataclass
class Report:
    rows: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add(self, instance_id, check, worst_slack, passed, trials=1, lam=None):
        self.rows.append(Row(instance_id, check, lam, int(trials), float(worst_slack), passed))

    @property
    def failures(self) -> list:
        return [r for r in self.rows if r.passed is False]


# -- suites -------------------------------------------------------------------


def _margin(value, tol):
    """Slack of ``value <= tol``."""
    return tol - value


def suite_entropy(rep: Report, n: int, trials: int, seed: int, tol: dict):
    rng = np.random.default_rng(seed)
    worst_p = worst_k = np.inf
    for _ in range(trials):
        rho = random_density(n, True, rng)
        sigma = random_density(n, True, rng)
        D = entropy.relative_entropy(rho, sigma)
        worst_k = min(worst_k, D)
        worst_p = min(worst_p, D - 0.5 * entropy.trace_distance(rho, sigma) ** 2)
    rep.add(f"entropy/n{n}", "klein", worst_k, worst_k >= 0, trials)
    rep.add(f"entropy/n{n}", "pinsker", worst_p, worst_p >= -tol["pinsker"], trials)


def suite_channels(rep: Report, n: int, trials: int, seed: int, tol: dict):
    rng = np.random.default_rng(seed)
    worst = np.inf
    for k in range(trials):
        d = 2 + k % 5
        ch = random_cptp(d, d, int(rng.integers(1, d + 2)), rng)
        r = channels.dpi_check(ch, random_density(d, True, rng), random_density(d, True, rng), tol["dpi"])
        worst = min(worst, r.slack)
    rep.add("channels/n2-6", "dpi", worst, worst >= -tol["dpi"], trials)

    cp = channels.is_completely_positive(channels.transpose_map(2))
    rep.add("channels/transpose2", "transpose_not_cp", -cp.min_eigenvalue, (not cp.is_cp) and cp.min_eigenvalue < 0)

    worst_rt = 0.0
    count = max(1, min(trials, 50))
    for _ in range(count):
        ch = random_cptp(n, n, int(rng.integers(1, n + 2)), rng).adjoint()
        worst_rt = max(worst_rt, choi_round_trip(ch.superop()))
    rep.add(f"channels/n{n}", "choi_round_trip", _margin(worst_rt, tol["choi"]), worst_rt <= tol["choi"], count)

    ok, worst_s = channels.is_schwarz_sampled(channels.choi_map(2), trials=max(trials, 100), seed=seed)
    rep.add("channels/choi_map", "schwarz_sampled", worst_s, ok, max(trials, 100))


def choi_round_trip(S) -> float:
    """Superoperator -> characteristic matrix -> Kraus -> superoperator residual."""
    n = int(round(np.sqrt(S.shape[0])))
    kraus = channels.characteristic_matrix(S).kraus(tol=1e-12)
    S2 = superop_from_map(lambda X: sum(V.conj().T @ X @ V for V in kraus), n)
    return float(np.max(np.abs(S - S2)))


def suite_monotone(rep: Report, n: int, trials: int, seed: int, tol: dict):
    rows = monotone.monotonicity_suite(trials=trials, seed=seed)
    for th in monotone.THEOREMS:
        sl = [r.slack for r in rows if r.theorem == th]
        rep.add("monotone/n2-4", th, min(sl), min(sl) >= -tol["monotone"], len(sl))
    l1 = [r.passed for r in rows if r.theorem == "L1M"]
    l2 = [r.passed for r in rows if r.theorem == "L2M"]
    agree = sum(a == b for a, b in zip(l1, l2))
    rep.add("monotone/n2-4", "L1M_L2M_agreement", agree - len(l1), agree == len(l1), len(l1))


def suite_lindblad(rep: Report, n: int, trials: int, seed: int, tol: dict):
    rng = np.random.default_rng(seed)
    count = max(1, min(trials, 50))
    rec = modular = gns = bkm = 0.0
    closure_ok = True
    for k in range(count):
        d = 2 + k % 3
        db = lindblad.random_db_generator(d, rng)
        L = db.superop()
        dec = lindblad.alicki_decompose(L, db.sigma)
        rec = max(rec, lindblad.reconstruction_residual(dec, L))
        modular = max(modular, dec.modular_residual())
        gns = max(gns, lindblad.db_check_gns(L, db.sigma).residual)
        bkm = max(bkm, lindblad.bkm_selfadjoint_check(L, db.sigma))
        pairing = dec.pairing()
        closure_ok &= all(abs(dec.jumps[p][1] + om) <= 1e-8 for (_, om), p in zip(dec.jumps, pairing))
    iid = "lindblad/n2-4"
    rep.add(iid, "alicki_reconstruction", _margin(rec, tol["residual"]), rec <= tol["residual"], count)
    rep.add(iid, "modular_relation", _margin(modular, tol["residual"]), modular <= tol["residual"], count)
    rep.add(iid, "closure_pairing", 0.0, closure_ok, count)
    rep.add(iid, "gns_selfadjoint", _margin(gns, tol["selfadjoint"]), gns <= tol["selfadjoint"], count)
    rep.add(iid, "bkm_selfadjoint", _margin(bkm, tol["residual"]), bkm <= tol["residual"], count)
    chk = lindblad.is_qms_generator(lindblad.depolarizing_generator(n).L)
    rep.add(f"lindblad/depolarizing{n}", "is_qms_generator", chk.min_eigenvalue, chk.is_qms)


def suite_transport(rep: Report, n: int, trials: int, seed: int, tol: dict):
    rng = np.random.default_rng(seed)
    count = max(1, min(trials, 100))
    chain = flow = 0.0
    for k in range(count):
        d = 2 + k % 3
        db = lindblad.random_db_generator(d, rng)
        rho = random_density(d, True, rng, eps=0.05)
        chain = max(chain, transport.chain_rule_residual(db, rho))
        flow = max(flow, transport.gradflow_residual(db, rho))
    rep.add("transport/n2-4", "chain_rule", _margin(chain, tol["residual"]), chain <= tol["residual"], count)
    rep.add("transport/n2-4", "gradient_flow", _margin(flow, tol["residual"]), flow <= tol["residual"], count)

    ep_worst = np.inf
    ep_count = max(1, min(trials, 20))
    for k in range(ep_count):
        d = 2 + k % 3
        db = lindblad.random_db_generator(d, rng)
        rho = random_density(d, True, rng, eps=0.05)
        gap = abs(convexity.entropy_production_fd(db, rho) + transport.metric_eval(db, rho, db.apply_dagger(rho)))
        ep_worst = min(ep_worst, 1e-5 - gap)
    rep.add("transport/n2-4", "entropy_production_fd", ep_worst, ep_worst >= 0, ep_count)

    db = lindblad.depolarizing_db(2)
    r0, r1 = np.diag([0.8, 0.2]), np.diag([0.2, 0.8])
    d, path = transport.geodesic_distance(db, r0, r1, m=16)
    oracle = transport.two_point_oracle(0.8, 0.2)
    rel = abs(d - oracle) / oracle
    rep.add("transport/depolarizing2", "geodesic_vs_oracle", _margin(rel, tol["geodesic"]), rel <= tol["geodesic"] and path.converged)
    d0, _ = transport.geodesic_distance(db, r0, r0, m=16)
    rep.add("transport/depolarizing2", "geodesic_self_distance", _margin(d0**2, 1e-10), d0**2 <= 1e-10)


def suite_convexity(rep: Report, n: int, trials: int, seed: int, tol: dict):
    certify_depolarizing(rep, n, trials, seed, tol)


SUITE_FUNCS = {
    "entropy": suite_entropy,
    "channels": suite_channels,
    "monotone": suite_monotone,
    "lindblad": suite_lindblad,
    "transport": suite_transport,
    "convexity": suite_convexity,
}


def certify_depolarizing(rep: Report, n: int, trials: int, seed: int, tol: dict, lam: float = 0.5):
    db = lindblad.depolarizing_db(n)
    iid = f"depolarizing{n}"
    rates = convexity.commutator_rates(db)
    rate_lam = rates.lam if isinstance(rates, convexity.RateCertificate) else float("nan")
    rep.add(iid, "commutator_rates", rate_lam, None, len(db.jumps), rate_lam)

    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    L = lindblad.depolarizing_generator(n).L
    cf = max(
        float(np.max(np.abs(lindblad.semigroup_apply(L, t, A) - lindblad.depolarizing_closed_form(n, t, A))))
        for t in (0.1, 0.5, 1.0, 2.0)
    )
    rep.add(iid, "closed_form_semigroup", 1e-10 - cf, cf <= 1e-10, 4)

    sym = max(convexity.symmetric_entropy_residual(db, convexity.sample_strict_state(n, rng)[0]) for _ in range(20))
    rep.add(iid, "symmetric_entropy_identity", 1e-10 - sym, sym <= 1e-10, 20)

    problem = convexity._CurvatureProblem(db)
    ge = convexity.gradient_estimate_check(db, lam, trials, seed, problem)
    ad = convexity.action_dissipation_check(db, lam, trials, seed, problem)
    rep.add(iid, "gradient_estimate", ge.worst_slack, ge.worst_slack >= -tol["curvature"], trials, lam)
    rep.add(iid, "action_dissipation", ad.worst_slack, ad.worst_slack >= -tol["curvature"], trials, lam)
    rep.add(iid, "duality_agreement", 0.0, ge.passed == ad.passed, trials, lam)

    rho0 = np.diag(np.r_[0.9, np.full(n - 1, 0.1 / (n - 1))])
    dec = convexity.decay_check(db, lam, rho0, (0.1, 0.25, 0.5, 1.0, 2.0, 3.0))
    rep.add(iid, "entropy_decay", min(r.slack for r in dec.rows), dec.passed, len(dec.rows), lam)
    lsi = convexity.lsi_check(db, lam, min(trials, 100), seed)
    rep.add(iid, "lsi", lsi.worst_slack, lsi.passed, lsi.trials, lam)
    emp = convexity.empirical_lambda(db, lam_max=2.0, trials=min(trials, 64), seed=seed)
    rep.add(iid, "empirical_lambda", emp, None, min(trials, 64), emp)


# -- file helpers ---------------------------------------------------------------


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _overrides(args) -> dict:
    out = {}
    for key in DEFAULT_TOLERANCES:
        v = getattr(args, f"tol_{key}", None)
        if v is not None:
            out[key] = v
    return out


def write_report(out: Path, rep: Report, header: dict):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.csv", "w", newline="") as fh:
        overrides = header.get("tolerance_overrides") or {}
        for k in sorted(overrides):
            fh.write(f"# tol-{k}={overrides[k]!r}\n")
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rep.rows:
            w.writerow(r.as_csv())
    asserted = [r for r in rep.rows if r.passed is not None]
    summary = dict(header)
    summary.update(
        {
            "checks": len(asserted),
            "passed": sum(bool(r.passed) for r in asserted),
            "failed": [f"{r.instance_id}:{r.check}" for r in rep.failures],
            "worst_slack": {f"{r.instance_id}:{r.check}": r.worst_slack for r in rep.rows},
        }
    )
    summary.update(rep.extra)
    _write_json(out / "summary.json", summary)


def _finish(rep: Report, out: Path, header: dict) -> int:
    write_report(out, rep, header)
    for r in rep.rows:
        c = r.as_csv()
        print(f"{c['pass']:4s}  {r.instance_id:28s} {r.check:28s} slack={c['worst_slack']}")
    if rep.failures:
        for r in rep.failures:
            print(f"invariant failed: {r.instance_id} {r.check} (worst slack {r.worst_slack:.3e})", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# -- subcommands ------------------------------------------------------------------


def cmd_run(args) -> int:
    if args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    if args.n < 2:
        raise ConfigError("--n must be at least 2")
    tol = dict(DEFAULT_TOLERANCES, **_overrides(args))
    suites = SUITES if args.suite == "all" else (args.suite,)
    rep = Report()
    for k, name in enumerate(suites):
        t0 = time.perf_counter()
        SUITE_FUNCS[name](rep, args.n, args.trials, args.seed + k, tol)
        log.info("suite %s finished in %.2fs", name, time.perf_counter() - t0)
    header = {"command": "run", "suite": args.suite, "n": args.n, "trials": args.trials, "seed": args.seed,
              "tolerance_overrides": _overrides(args)}
    return _finish(rep, Path(args.out), header)


def _load_db(args) -> lindblad.DBGenerator:
    if getattr(args, "demo", None):
        if args.demo == "depolarizing":
            return lindblad.depolarizing_db(args.n)
        if args.demo == "thermal":
            return lindblad.thermal_qubit_db()
        raise ConfigError(f"unknown demo {args.demo!r}")
    if getattr(args, "db", None):
        return lindblad.DBGenerator.from_json(_read_json(args.db))
    raise ConfigError("need --demo or --db")


def cmd_certify(args) -> int:
    tol = dict(DEFAULT_TOLERANCES, **_overrides(args))
    rep = Report()
    if args.demo == "depolarizing" and not args.db:
        certify_depolarizing(rep, args.n, args.trials, args.seed, tol, args.lam)
    else:
        db = _load_db(args)
        rates = convexity.commutator_rates(db)
        if isinstance(rates, convexity.RateCertificate):
            rep.add("generator", "commutator_rates", rates.lam, None, len(db.jumps), rates.lam)
        else:
            rep.add("generator", "commutator_rates", -rates.worst.residual, None, len(db.jumps))
        problem = convexity._CurvatureProblem(db)
        ge = convexity.gradient_estimate_check(db, args.lam, args.trials, args.seed, problem)
        ad = convexity.action_dissipation_check(db, args.lam, args.trials, args.seed, problem)
        rep.add("generator", "gradient_estimate", ge.worst_slack, ge.passed, args.trials, args.lam)
        rep.add("generator", "action_dissipation", ad.worst_slack, ad.passed, args.trials, args.lam)
        rep.add("generator", "duality_agreement", 0.0, ge.passed == ad.passed, args.trials, args.lam)
        if args.lam > 0:
            lsi = convexity.lsi_check(db, args.lam, min(args.trials, 100), args.seed)
            rep.add("generator", "lsi", lsi.worst_slack, lsi.passed, lsi.trials, args.lam)
    header = {"command": "certify", "demo": args.demo, "n": args.n, "lambda": args.lam, "trials": args.trials,
              "seed": args.seed, "tolerance_overrides": _overrides(args)}
    return _finish(rep, Path(args.out), header)


def cmd_decompose(args) -> int:
    gen = lindblad.Generator.from_json(_read_json(args.generator))
    sigma = matrix_from_json(_read_json(args.sigma))
    try:
        db = lindblad.alicki_decompose(gen.L, sigma)
    except NotDetailedBalance as exc:
        print(f"detailed balance residual {exc.residual:.3e} > tol {lindblad.DB_TOL:.0e}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except BlockLeakage as exc:
        print(f"block leakage {exc.magnitude:.3e}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    verification = {
        "reconstruction_residual": lindblad.reconstruction_residual(db, gen.L),
        "modular_residual": db.modular_residual(),
        "ergodic": lindblad.ergodicity_check(db).ergodic,
        "bkm_selfadjoint_residual": lindblad.bkm_selfadjoint_check(gen.L, sigma),
        "jumps": len(db.jumps),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "jumps.json", dict(db.to_json(), verification=verification))
    for k, v in verification.items():
        print(f"{k}: {v}")
    return EXIT_OK


def cmd_geodesic(args) -> int:
    obj = _read_json(args.inp)
    try:
        if "db" in obj:
            db = lindblad.DBGenerator.from_json(obj["db"])
        elif obj.get("demo") == "depolarizing":
            db = lindblad.depolarizing_db(int(obj.get("n", 2)))
        else:
            raise ConfigError("pair file needs 'db' or 'demo'")
        rho0 = matrix_from_json(obj["rho0"])
        rho1 = matrix_from_json(obj["rho1"])
    except KeyError as exc:
        raise ConfigError(f"pair file is missing {exc}") from exc
    d, path = transport.geodesic_distance(db, rho0, rho1, m=args.m, max_iter=args.max_iter, tol=args.tol)
    d0, _ = transport.geodesic_distance(db, rho0, rho0, m=args.m, max_iter=args.max_iter, tol=args.tol)
    rep = Report()
    rep.add("pair", "distance", d, None, args.m)
    rep.add("pair", "converged", 0.0, path.converged, path.iterations)
    cont = path.continuity_residual(db)
    rep.add("pair", "continuity", 1e-7 - cont, cont <= 1e-7, args.m)
    rep.add("pair", "self_distance", d0, d0**2 <= 1e-10, args.m)
    rep.extra["distance"] = d
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "path.json", path.to_json())
    header = {"command": "geodesic", "m": args.m, "max_iter": args.max_iter, "tol": args.tol}
    return _finish(rep, out, header)


def cmd_flow(args) -> int:
    db = _load_db(args)
    if args.rho:
        rho0 = matrix_from_json(_read_json(args.rho))
    else:
        rho0 = random_density(db.n, True, args.seed)
    ts = np.linspace(0.0, args.t_max, args.steps + 1)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    D_prev = np.inf
    monotone_ok = True
    with open(out / "flow.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "relative_entropy", "trace_distance", "entropy_production"])
        for t in ts:
            rt = convexity.evolve(db, rho0, float(t))
            D = entropy.relative_entropy(rt, db.sigma)
            monotone_ok &= D <= D_prev + 1e-12
            D_prev = D
            try:
                ep = transport.entropy_production(db, rt)
            except QMSError:
                ep = float("nan")
            w.writerow([f"{t:.6g}", f"{D:.12e}", f"{entropy.trace_distance(rt, db.sigma):.12e}", f"{ep:.12e}"])
    rep = Report()
    rep.add("flow", "entropy_monotone", 0.0, bool(monotone_ok), len(ts))
    return _finish(rep, out, {"command": "flow", "t_max": args.t_max, "steps": args.steps, "seed": args.seed})


# -- parser -----------------------------------------------------------------------


def _add_tol_flags(p):
    for key, default in DEFAULT_TOLERANCES.items():
        p.add_argument(f"--tol-{key}", type=float, default=None, help=f"override tolerance (default {default:g})")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qms", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run check suites")
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="qms_out")
    _add_tol_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("certify", help="entropy-decay certificate for a generator")
    p.add_argument("--demo", choices=("depolarizing", "thermal"), default=None)
    p.add_argument("--db", help="DB generator JSON file")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="qms_out")
    _add_tol_flags(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("decompose", help="jump decomposition of a detailed-balance generator")
    p.add_argument("--generator", required=True)
    p.add_argument("--sigma", required=True)
    p.add_argument("--out", default="qms_out")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("geodesic", help="transport distance between two states")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", default="qms_out")
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("flow", help="relative entropy along the semigroup")
    p.add_argument("--demo", choices=("depolarizing", "thermal"), default=None)
    p.add_argument("--db")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--rho", help="initial state JSON (random strict state if omitted)")
    p.add_argument("--t-max", type=float, default=3.0)
    p.add_argument("--steps", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="qms_out")
    p.set_defaults(func=cmd_flow)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_IO
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "certify" and args.demo is None and args.db is None:
        print("certify needs --demo or --db", file=sys.stderr)
        return EXIT_IO
    if args.command == "certify" and args.demo == "depolarizing" and args.n < 2:
        print("--n must be at least 2", file=sys.stderr)
        return EXIT_IO
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except QMSError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
