"""Acceptance suite: the thirteen release criteria at their stated tolerances.

Every experiment runs through the CLI from ``configs/acceptance``; criteria
without an experiment kind (sphere identities under refinement, the
great-circle suite) are evaluated with the library directly.  Each test
prints one ``PASS``/``FAIL`` line, and the lines are repeated in the
terminal summary.

    pytest tests/test_acceptance.py -v
"""
import json
import math
import shutil
import time
from pathlib import Path

import numpy as np
import pytest

from biflow.cli import main
from biflow.experiments import random_sphere_map
from biflow.fields import field_from_function, great_circle_map
from biflow.grid import build_grid
from biflow.ops import gradient_sq_support
from biflow.sphere import (_wsum_sq, calibrate_sign, consistency_defect, energies,
                           rhs_relative_residual, tension_parts)

pytestmark = pytest.mark.slow

CONFIGS = Path(__file__).resolve().parent.parent / "configs" / "acceptance"
RESULTS = []


def report(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'}  criterion {number:2d}  {title}: {detail}"
    RESULTS.append((number, line))
    print(line)


def _run_suite(out: Path) -> dict:
    runs = {}
    for cfg in sorted(CONFIGS.glob("*.cfg")):
        target = out / cfg.stem
        start = time.perf_counter()
        status = main(["run", str(cfg), "-o", str(target)])
        seconds = time.perf_counter() - start
        summary = json.loads((target / "summary.json").read_text())
        runs[cfg.stem] = {"status": status, "seconds": seconds, "summary": summary, "dir": target}
    return runs


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    path = tmp_path_factory.mktemp("acceptance")
    yield path
    shutil.rmtree(path, ignore_errors=True)


@pytest.fixture(scope="module")
def suite(workdir):
    return _run_suite(workdir / "first")


def _check(run, name):
    return run["summary"]["checks"][name]


def _constants(run):
    return run["summary"]["constants"]


def test_01_operator_selftest(suite):
    run = suite["selftest"]
    checks = run["summary"]["checks"]
    exact = all(v["passed"] for k, v in checks.items() if k.startswith("exact_"))
    orders = _check(run, "order_gradient")["orders"] + _check(run, "order_laplacian")["orders"]
    in_band = all(1.8 <= p <= 2.2 for p in orders)
    ok = exact and in_band and run["seconds"] < 60
    report(1, "operator self-test", ok,
           f"exact={exact}, orders={[round(p, 3) for p in orders]}, {run['seconds']:.1f} s")
    assert ok


def test_02_energy_gradient(suite):
    run = suite["selftest"]
    worst = _check(run, "energy_gradient")["worst_rel_error"]
    ok = worst <= 1e-5 and run["seconds"] < 60
    report(2, "energy gradient vs central differences (20 directions, N=9)", ok,
           f"worst relative error {worst:.2e}")
    assert ok


def _glossary_tension_norm(u):
    """``||Delta_h u + u |grad_h u|^2||`` over the Laplacian nodes (continuum tension formula)."""
    g = u.grid
    a, _, _ = tension_parts(u)
    full = np.zeros(g.size)
    full[g.support_idx] = gradient_sq_support(u.flat, g)
    return math.sqrt(_wsum_sq(g.lap_weights, a + u.flat[:, g.lap_idx] * full[g.lap_idx]))


def test_03_sphere_identities(suite):
    run = suite["selftest"]
    orth = _check(run, "sphere_orthogonality")["value"]
    split = _check(run, "sphere_energy_split")["value"]
    ratios = []
    for seed in (0, 1, 2):
        coarse = consistency_defect(random_sphere_map(build_grid(9), 3, seed))
        fine = consistency_defect(random_sphere_map(build_grid(17), 3, seed))
        ratios.append(coarse / fine)
    ok = orth <= 1e-12 and split <= 1e-12 and min(ratios) >= 2.0
    report(3, "sphere identities", ok,
           f"<u,tau> {orth:.1e}, E-(I+normal) {split:.1e}, "
           f"consistency defect N=9->17 decrease {min(ratios):.1f}x")
    assert ok


def test_04_great_circle(suite):
    maps = {N: field_from_function(build_grid(N), great_circle_map(1.0), sphere=True)
            for N in (9, 17, 33)}
    tau = {N: math.sqrt(_wsum_sq(u.grid.lap_weights, tension_parts(u)[2])) for N, u in maps.items()}
    gloss = {N: _glossary_tension_norm(maps[N]) for N in (9, 17)}
    decrease = gloss[9] / gloss[17]
    E = energies(maps[33]).E
    cal = calibrate_sign()
    res17 = rhs_relative_residual(maps[17], cal.sigma)
    reported = all("sigma" in r["summary"]["constants"] for r in suite.values())
    ok = (decrease >= 3.0 and max(tau.values()) <= 1e-12
          and abs(E / (math.pi**2 / 8) - 1) <= 0.1 and res17 <= 0.2 and reported)
    report(4, "great-circle suite (alpha=1)", ok,
           f"tension N=9->17 decrease {decrease:.2f}x (projected tension {max(tau.values()):.1e}), "
           f"E(N=33) = {E:.4f} vs {math.pi**2 / 8:.4f}, sigma = {cal.sigma}, "
           f"calibrated residual N=17 {res17:.4f}")
    assert ok


def test_05_flow(suite):
    run = suite["flow"]
    names = ("converged", "energy_nonincreasing", "energy_inequality")
    ok = all(_check(run, n)["passed"] for n in names) and run["seconds"] < 300
    c = _constants(run)
    report(5, "flow (bump data, N=17)", ok,
           f"{c['steps']} steps, residual {c['final_residual']:.2e}, "
           f"inequality excess {_check(run, 'energy_inequality')['excess']:.2e}, "
           f"{run['seconds']:.0f} s")
    assert ok


def test_06_flow_convexity(suite):
    run = suite["flow"]
    conv, mono = _check(run, "flow_convexity"), _check(run, "ut_monotone")
    ok = conv["passed"] and mono["passed"]
    report(6, "flow convexity and |u_t|^2 monotonicity", ok,
           f"{conv['pairs']} snapshot pairs, worst |u_t|^2 excess {mono['worst_excess']:.2e} "
           f"(slack {mono['slack']:.2e})")
    assert ok


def test_07_static_convexity(suite):
    intr, extr = suite["convexity_intrinsic"], suite["convexity_extrinsic"]
    chain, conv2 = _check(intr, "intrinsic-convexity"), _check(intr, "lemma-conv2")
    ext = _check(extr, "extrinsic-convexity")
    seconds = intr["seconds"] + extr["seconds"]
    ok = (chain["passed"] and conv2["passed"] and ext["passed"]
          and chain["pairs"] == conv2["pairs"] == ext["pairs"] == 150 and seconds < 600)
    report(7, "static convexity (50 seeds x 3 amplitudes, N=17)", ok,
           f"chain {chain['pairs'] - chain['failures']}/{chain['pairs']}, "
           f"lemma {conv2['pairs'] - conv2['failures']}/{conv2['pairs']}, "
           f"extrinsic {ext['pairs'] - ext['failures']}/{ext['pairs']}, {seconds:.0f} s")
    assert ok


def test_08_uniqueness(suite):
    run = suite["uniqueness"]
    d = _check(run, "max_distance")
    ok = _check(run, "all_converged")["passed"] and d["passed"]
    report(8, "uniqueness (3 seeds, N=17)", ok, f"max W22 distance {d['value']:.2e}")
    assert ok


def test_09_hardy(suite):
    run = suite["hardy"]
    plain, stable = _check(run, "hardy_plain_ratio"), _check(run, "hardy_seed_stable")
    ok = plain["passed"] and stable["passed"] and _check(run, "hardy_estimate_finite")["passed"]
    report(9, "Hardy ratio (N=33) and K=50 estimate", ok,
           f"ratio {plain['ratio']:.5f} vs {plain['reference']:.5f} ({100 * plain['rel_error']:+.2f}%), "
           f"seed spread {100 * stable['spread']:.1f}%")
    assert ok


def test_10_monotonicity(suite):
    run = suite["monotonicity"]
    mono, flat = _check(run, "harmonic_monotone"), _check(run, "constant_flat")
    ok = mono["passed"] and flat["passed"]
    report(10, "harmonic mean-value monotonicity (degree <= 4, 5 centres, N=33)", ok,
           f"worst relative step {mono['worst_relative_step']:.2e}, "
           f"constant deviation {flat['deviation']:.1e}")
    assert ok


def test_11_green(suite):
    run = suite["green"]
    names = ("psi0_within_10pct", "psi0_error_halves", "fd_agreement_order_h",
             "thmB2_ratio_stable", "calibration_converges")
    ok = all(_check(run, n)["passed"] for n in names)
    p0, half = _check(run, "psi0_within_10pct"), _check(run, "psi0_error_halves")
    report(11, "Green's function", ok,
           f"|psi(0)-1| {p0['error']:.1e} -> {half['fine']:.1e}, "
           f"FD constant C = {_constants(run)['fd_constant_C']:.2f}, "
           f"bound ratios {[round(r, 4) for r in _check(run, 'thmB2_ratio_stable')['ratios']]}, "
           f"calibration error {_check(run, 'calibration_converges')['fine']:.4f}")
    assert ok


def test_12_key_estimate(suite):
    run = suite["convexity_intrinsic"]
    chk = _check(run, "key_estimate_bounded")
    c = _constants(run)
    bounds = {q: c.get(f"key_estimate_bound_{q}") for q in ("grad4", "grad2lap", "gradDlap")}
    ok = chk["passed"] and all(b is not None and math.isfinite(b) for b in bounds.values())
    report(12, "key estimate ratio / eps bounded", ok,
           ", ".join(f"{q} {b:.2e}" for q, b in bounds.items()))
    assert ok


def test_13_determinism(suite, workdir):
    again = _run_suite(workdir / "second")
    mismatched, compared = [], 0
    for name, run in suite.items():
        for csv in sorted(run["dir"].rglob("*.csv")):
            twin = again[name]["dir"] / csv.relative_to(run["dir"])
            compared += 1
            if not twin.is_file() or twin.read_bytes() != csv.read_bytes():
                mismatched.append(f"{name}/{csv.name}")
    ok = compared > 0 and not mismatched
    report(13, "determinism (full suite twice)", ok,
           f"{compared} CSV files compared, {len(mismatched)} differ" +
           (f": {mismatched}" if mismatched else ""))
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
