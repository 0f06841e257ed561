"""Acceptance criteria, run at full budget.

Each test prints ``criterion N: PASS|FAIL  <detail>`` and the lines are
repeated in the terminal summary.  The suite is run twice through the CLI
(1 worker, then 2 workers); criteria 6, 7, 8 and 9 read the first run and
criterion 10 compares the two.
"""

import json
import math
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from fkmatch import GBesqI, GBesqII, SquaredBesselBridge, SquaredRadialOU, TransformQuery, laplace_marginal
from fkmatch.identities import pde_residual, z_score
from fkmatch.joint import RiccatiFlow, invert_flow, joint_laplace
from fkmatch.numerics import TimeFunction
from fkmatch.sde import SimConfig, joint_functional, laplace_functional, mc_expectation

pytestmark = pytest.mark.slow

SEED = 42
Z_LIMIT = 3.0


def record(log, number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    log.append(line)
    return ok


# --- shared suite runs -------------------------------------------------------------------

def _run_suite(out_path, workers):
    cmd = [sys.executable, "-m", "fkmatch.cli", "suite", "--seed", str(SEED), "--workers", str(workers),
           "--out", str(out_path)]
    started = time.time()
    proc = subprocess.run(cmd, capture_output=True, text=True)
    elapsed = time.time() - started
    assert proc.returncode in (0, 1), proc.stderr
    return json.loads(out_path.read_text()), proc.stdout, elapsed


@pytest.fixture(scope="session")
def suite_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("suite")
    first = _run_suite(root / "workers1.json", 1)
    second = _run_suite(root / "workers2.json", 2)
    return first, second


@pytest.fixture(scope="session")
def suite_report(suite_runs):
    return suite_runs[0][0]


def _by_id(report):
    return {item["id"]: item for item in report["results"] + report["ledger"]}


# --- 1: boundary exactness -----------------------------------------------------------------

def _random_specs(rng, n):
    for _ in range(n):
        x = rng.uniform(0, 5)
        d = rng.uniform(0, 4)
        c = -rng.uniform(0, 3)
        yield GBesqI(x, TimeFunction.constant(d, role="nonnegative"))
        yield GBesqII(x, TimeFunction.expression(f"{d + 0.5} + 0.5*sin(t)", role="nonnegative"),
                      TimeFunction.constant(c, role="nonpositive"))
        yield SquaredRadialOU(x, d, -c)
        yield SquaredBesselBridge(x, d)


def test_criterion_1_boundary_exactness(acceptance_log):
    rng = np.random.default_rng(1)
    worst = 0.0
    count = 0
    for spec in _random_specs(rng, 20):
        t = rng.uniform(0, 1)
        lam = rng.uniform(0, 10)
        worst = max(worst, abs(laplace_marginal(spec, TransformQuery(t, 0.0)) - 1.0))
        worst = max(worst, abs(laplace_marginal(spec, TransformQuery(0.0, lam)) - math.exp(-lam * spec.x0)))
        count += 1
    ok = worst <= 1e-12
    record(acceptance_log, 1, ok, f"{count} draws over 4 families, max error {worst:.2e} (tol 1e-12)")
    assert ok


# --- 2: standard BESQ reduction ----------------------------------------------------------------

def test_criterion_2_standard_besq(acceptance_log):
    worst = 0.0
    for d in (0.5, 2.0, 3.0):
        for t in np.linspace(0.1, 2.0, 10):
            for lam in np.linspace(0.1, 5.0, 10):
                s = 1 + 2 * lam * t
                exact = s ** (-d / 2) * math.exp(-1.3 * lam / s)
                got = laplace_marginal(GBesqI(1.3, TimeFunction.constant(d)), TransformQuery(t, lam))
                worst = max(worst, abs(got - exact))
    ok = worst <= 1e-10
    record(acceptance_log, 2, ok, f"10x10 grid, 3 dimensions, max error {worst:.2e} (tol 1e-10)")
    assert ok


# --- 3: PDE residuals ------------------------------------------------------------------------------

def test_criterion_3_pde_residuals(acceptance_log):
    grid = ((0.3, 0.5, 0.7), (0.5, 1.0, 1.5))
    specs = {
        "gbesq1": GBesqI(1.0, "2"),
        "gbesq2": GBesqII(1.0, "1 + t", "-0.5 - t"),
        "bridge": SquaredBesselBridge(1.0, 2.0),
        "srou": SquaredRadialOU(1.0, 2.0, 1.0),
    }
    ratios = {}
    for name, spec in specs.items():
        pair = pde_residual(spec, lambda t, lam, s=spec: laplace_marginal(s, TransformQuery(t, lam)), grid, 0.05)
        ratios[name] = pair.ratio
    ok = all(3.5 <= r <= 4.5 for r in ratios.values())
    detail = ", ".join(f"{k} {v:.3f}" for k, v in ratios.items())
    record(acceptance_log, 3, ok, f"residual(h)/residual(h/2): {detail} (need [3.5, 4.5])")
    assert ok


# --- 4: MC concordance -----------------------------------------------------------------------------

CONCORDANCE = [
    ("gbesq1", GBesqI(1.0, "2"), 1.0),
    ("gbesq2", GBesqII(1.0, "1", "-1"), 1.0),
    ("srou", SquaredRadialOU(1.0, 2.0, 1.0), 1.0),
    ("bridge", SquaredBesselBridge(1.0, 2.0), 0.5),
]


def _mc_vs_exact(spec, functional, exact, cfg):
    est = mc_expectation(spec, functional, cfg)
    z = z_score(est, exact)
    if abs(z) <= Z_LIMIT:
        return z, None
    rerun = mc_expectation(spec, functional, replace(cfg, n_paths=4 * cfg.n_paths, stream_base=cfg.stream_base + (1 << 30)))
    return z, z_score(rerun, exact)


def test_criterion_4_mc_concordance(acceptance_log):
    rows, ok = [], True
    for k, (name, spec, t) in enumerate(CONCORDANCE):
        for j, lam in enumerate((0.5, 1.0, 2.0)):
            exact = laplace_marginal(spec, TransformQuery(t, lam))
            cfg = SimConfig(t, 1e-3, 100_000, SEED, stream_base=(k * 3 + j) << 32)
            z, z_rerun = _mc_vs_exact(spec, laplace_functional(lam), exact, cfg)
            final = z if z_rerun is None else z_rerun
            ok &= abs(final) <= Z_LIMIT
            rows.append(f"{name}@{lam:g} z={z:+.2f}" + ("" if z_rerun is None else f"->{z_rerun:+.2f}"))
    record(acceptance_log, 4, ok, "; ".join(rows))
    assert ok


# --- 5: joint transforms -----------------------------------------------------------------------------

JOINT = [
    ("gdlp", GBesqI(1.0, "2")),
    ("ou", SquaredRadialOU(1.0, 2.0, 1.0)),
    ("bridge", SquaredBesselBridge(1.0, 2.0)),
]


def test_criterion_5_joint_transforms(acceptance_log):
    worst_tag = 0.0
    for _, spec in JOINT:
        for gamma in (0.5, 2.0):
            closed = RiccatiFlow.for_spec(spec, gamma)
            numeric = RiccatiFlow.for_spec(spec, gamma, "numeric", n_steps=4000)
            for t in (0.25, 0.5, 0.75):
                for lam in (0.5, 1.0, 2.0):
                    worst_tag = max(worst_tag, abs(invert_flow(closed, t, lam) - invert_flow(numeric, t, lam)))
                    q = TransformQuery(t, lam, gamma)
                    worst_tag = max(worst_tag, abs(joint_laplace(spec, q) - joint_laplace(spec, q, "numeric", 4000)))

    zs, mc_ok = [], True
    for k, (name, spec) in enumerate(JOINT):
        t = 0.5 if name == "bridge" else 1.0
        for j, gamma in enumerate((0.5, 2.0)):
            exact = joint_laplace(spec, TransformQuery(t, 1.0, gamma))
            cfg = SimConfig(t, 1e-3, 100_000, SEED, stream_base=(100 + 2 * k + j) << 32)
            z, z_rerun = _mc_vs_exact(spec, joint_functional(1.0, gamma), exact, cfg)
            final = z if z_rerun is None else z_rerun
            mc_ok &= abs(final) <= Z_LIMIT
            zs.append(f"{name}@{gamma:g} z={z:+.2f}" + ("" if z_rerun is None else f"->{z_rerun:+.2f}"))

    base = GBesqI(1.0, "2")
    gap = abs(joint_laplace(base, TransformQuery(1.0, 1.0, 1e-6)) - laplace_marginal(base, TransformQuery(1.0, 1.0)))
    ok = worst_tag <= 1e-7 and mc_ok and gap <= 1e-4
    record(acceptance_log, 5, ok,
           f"closed vs numeric max {worst_tag:.1e} (tol 1e-7); MC {'; '.join(zs)}; gamma->0 gap {gap:.1e} (tol 1e-4)")
    assert ok


# --- 6 to 9: identity suite ----------------------------------------------------------------------------

SUITE_IDS = ("HBP_COSH", "PGSCE_RECIP", "BAFF_EL", "JJ1_GEOM", "JACOBI_UP", "JACOBI_DOWN",
             "HYPFK_COSH", "TRICOMI_MOMENT", "WAVE_TRSOL_DENSITY")


def test_criterion_6_identity_suite(acceptance_log, suite_report):
    items = _by_id(suite_report)
    rows, ok = [], True
    for name in SUITE_IDS:
        item = items[name]
        passed = item["verdict"] == "pass" and abs(item["statistic"]) <= Z_LIMIT
        ok &= passed
        rows.append(f"{name} {item['verdict']} z={item['statistic']:+.2f}" + (" (rerun)" if item["rerun"] else ""))
    record(acceptance_log, 6, ok, "; ".join(rows))
    assert ok


def test_criterion_7_doss_pathwise(acceptance_log, suite_report):
    item = _by_id(suite_report)["DOSS_PATHWISE"]
    ev = item["evidence"]
    gaps, limit = ev["max_sup"], item["tolerance"]
    ok = item["verdict"] == "pass" and all(a > b for a, b in zip(gaps, gaps[1:])) and gaps[-1] <= limit
    record(acceptance_log, 7, ok,
           f"max sup gaps {', '.join(f'{g:.3g}' for g in gaps)} at dt 1e-2/1e-3/1e-4; threshold {limit:.3g}")
    assert ok


def test_criterion_8_fk_membership(acceptance_log, suite_report):
    items = _by_id(suite_report)
    pos = items["FK_MEMBERSHIP(gbesq1)"]["evidence"]
    neg = items["FK_MEMBERSHIP(bridge)"]["evidence"]
    ok = pos["member"] and pos["max_residual"] <= 1e-6 and (not neg["member"]) and neg["max_residual"] >= 1e-2
    record(acceptance_log, 8, ok,
           f"gbesq1 residual {pos['max_residual']:.1e} (member), bridge residual {neg['max_residual']:.3g} (not member)")
    assert ok


def test_criterion_9_discrepancy_ledger(acceptance_log, suite_report):
    ledger = {item["id"]: item for item in suite_report["ledger"]}
    result_ids = {item["id"] for item in suite_report["results"]}
    rows, ok = [], True
    for name in ("SROU_DISCREPANCY", "JJ31_DISCREPANCY"):
        item = ledger.get(name)
        if item is None or name in result_ids:
            ok = False
            rows.append(f"{name} missing from ledger")
            continue
        ev = item["evidence"]
        good = (item["verdict"] == "ledger" and item["lhs"]["n_paths"] >= 1_000_000
                and abs(ev["winner_z"]) <= Z_LIMIT and abs(ev["loser_z"]) > 5)
        ok &= good
        rows.append(f"{name} winner={ev['winner']} z={ev['winner_z']:+.2f}, loser={ev['loser']} z={ev['loser_z']:+.1f}")
    record(acceptance_log, 9, ok, "; ".join(rows))
    assert ok


# --- 10: determinism ---------------------------------------------------------------------------------

def test_criterion_10_determinism(acceptance_log, suite_runs):
    (rep1, _, t1), (rep2, _, t2) = suite_runs
    sections = lambda r: json.dumps({"results": r["results"], "ledger": r["ledger"]}, sort_keys=True)  # noqa: E731
    a, b = sections(rep1), sections(rep2)
    ok = a == b
    record(acceptance_log, 10, ok,
           f"suite with 1 worker ({t1:.0f}s) vs 2 workers ({t2:.0f}s): result sections "
           + ("byte-identical" if ok else "differ") + f" ({len(a)} bytes)")
    assert ok
