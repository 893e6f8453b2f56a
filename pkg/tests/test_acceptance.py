"""The ten primary acceptance criteria at their stated tolerances.

Each test prints one ``PASS``/``FAIL`` line (with the measured quantity and
wall time) and then asserts. A summary table is printed when the module
finishes. Runtime limits are part of each criterion.
"""

import time

import numpy as np
import pytest

from stochbidomain.config import ScenarioConfig, build_scenario, ensemble_spec
from stochbidomain.ensemble import EnsembleSpec, PathScenario
from stochbidomain.galerkin import BidomainGalerkin, GalerkinConfig, Geometry, check_coercivity, check_monotonicity
from stochbidomain.membrane import MembraneModel, check_structural_bounds
from stochbidomain.noise import Forcing, NoiseModel
from stochbidomain.verify import (energy_suite, linear_oracle_check, monodomain_compare, moment_suite, run_ladder,
                                  stability_suite, translation_suite, weak_residual_richardson)

RESULTS = []


@pytest.fixture(scope="module", autouse=True)
def summary(request):
    yield
    capman = request.config.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled():
        print("\n\nacceptance summary")
        for line in RESULTS:
            print("  " + line)


def report(request, idx, name, ok, detail, elapsed, limit):
    within = elapsed <= limit
    line = f"{'PASS' if ok and within else 'FAIL'}  [{idx:2d}] {name}: {detail} ({elapsed:.2f}s / {limit:g}s)"
    RESULTS.append(line)
    capman = request.config.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled():
        print("\n" + line)
    assert ok, line
    assert within, line


def default_cfg() -> ScenarioConfig:
    return ScenarioConfig()


def test_01_consistency(request):
    t0 = time.perf_counter()
    cfg = default_cfg()
    cfg.time.T = 10.0
    sc = build_scenario(cfg)
    assert sc.config.n == 16 and sc.config.dt == 1e-3 and sc.config.steps == 10_000
    rec = sc.solve(cfg.ensemble.master_seed)
    defect = float(rec.consistency_defect().max())
    report(request, 1, "v-consistency over 1e4 steps", defect <= 1e-10, f"max defect {defect:.2e} <= 1e-10",
           time.perf_counter() - t0, 10)


def test_02_drift_dissipativity(request):
    t0 = time.perf_counter()
    sc = build_scenario(default_cfg())
    p = BidomainGalerkin.from_geometry(sc.geometry, sc.membrane, sc.forcing, sc.config.eps)
    rng = np.random.default_rng(2)
    worst = -np.inf
    for _ in range(1000):
        C1, C2 = 10 * rng.standard_normal(64), 10 * rng.standard_normal(64)
        worst = max(worst, check_monotonicity(C1, C2, p).I_M)
    report(request, 2, "I_F^M <= 0 on 1e3 random pairs", worst <= 0.0, f"max I_F^M {worst:.3e}",
           time.perf_counter() - t0, 5)


def test_03_structural_certificates(request):
    t0 = time.perf_counter()
    model = MembraneModel()
    rep = check_structural_bounds(model, v_range=(-10, 10), samples=10_000, w_range=(-10, 10))
    worst = min(rep.margins.values())
    report(request, 3, "membrane structural margins on |v|,|w| <= 10", rep.ok,
           f"min margin {worst:.3e} over {sorted(rep.margins)}", time.perf_counter() - t0, 5)


def test_04_monotonicity_coercivity(request):
    t0 = time.perf_counter()
    sc = build_scenario(default_cfg())
    p = BidomainGalerkin.from_geometry(sc.geometry, sc.membrane, sc.forcing, sc.config.eps)
    rng = np.random.default_rng(4)

    def ball():
        x = rng.standard_normal(64)
        return x / np.linalg.norm(x) * 10 * rng.uniform() ** (1 / 64)

    mono, coer = np.inf, np.inf
    for _ in range(1000):
        C1, C2 = ball(), ball()
        mono = min(mono, check_monotonicity(C1, C2, p).margin)
        coer = min(coer, check_coercivity(C1, p))
    ok = mono >= 0 and coer >= 0
    report(request, 4, "monotonicity/coercivity margins in radius-10 ball", ok,
           f"min margins K_r {mono:.3e}, K {coer:.3e}", time.perf_counter() - t0, 10)


def test_05_linear_oracle(request):
    t0 = time.perf_counter()
    cfg = default_cfg()
    cfg.basis.n = 1
    cfg.membrane.enabled = False
    cfg.noise.v.b1 = 0.0
    cfg.noise.w.b1 = 0.0
    sc = build_scenario(cfg)
    rep = linear_oracle_check(sc, EnsembleSpec(256, cfg.ensemble.master_seed))
    row = rep.rows[0]
    report(request, 5, "single-mode linear second moment", rep.passed,
           f"MC {row['mc_mean']:.5f} vs exact {row['exact']:.5f}, z={row['z']:.2f} <= 3",
           time.perf_counter() - t0, 30)


def test_06_energy_and_moments(request):
    t0 = time.perf_counter()
    cfg = default_cfg()
    v = cfg.verify
    ladder = run_ladder(lambda n: build_scenario(cfg, n), v.ladder, ensemble_spec(cfg, 64))
    e = energy_suite(ladder, v.energy_growth, v.min_paths)
    m = moment_suite(ladder, v.q0, v.moment_growth, v.min_paths)
    eg = max(r["growth"] for r in e.rows if "growth" in r)
    mg = max(r["growth"] for r in m.rows if "growth" in r)
    report(request, 6, "n-uniform energy / q0=5 moments over n in {8,16,32}", e.passed and m.passed,
           f"max growth {eg:.3f} <= 1.25, {mg:.3f} <= 1.35", time.perf_counter() - t0, 300)


def test_07_translation(request):
    t0 = time.perf_counter()
    cfg = default_cfg()
    sc = build_scenario(cfg)
    deltas = [k * cfg.time.dt for k in cfg.verify.delta_steps]
    rep = translation_suite(sc, deltas, ensemble_spec(cfg, 64))
    s = rep.slopes
    report(request, 7, "translation slopes", rep.passed,
           f"v {s['v']['slope']:.3f} (>= 0.25 - {s['v']['ci_half_width']:.3f}), "
           f"w {s['w']['slope']:.3f} (>= 0.5 - {s['w']['ci_half_width']:.3f})", time.perf_counter() - t0, 300)


def test_08_stability(request):
    t0 = time.perf_counter()
    cfg = default_cfg()
    sc = build_scenario(cfg)
    spec = EnsembleSpec(32, cfg.ensemble.master_seed, "common-increments")
    rep = stability_suite(sc, [0.0, 1e-2, 1e-3, 1e-4], spec)
    consts = [r["constant"] for r in rep.rows if r["s"] > 0]
    report(request, 8, "pathwise stability", rep.passed,
           f"zero at s=0: {rep.gates['zero_at_s0']}, C_hat {min(consts):.4f}..{max(consts):.4f} (factor <= 2)",
           time.perf_counter() - t0, 180)


def test_09_monodomain(request):
    t0 = time.perf_counter()
    cfg = default_cfg()
    sc = build_scenario(cfg)
    assert sc.geometry.conductivity.proportionality() is not None
    rep = monodomain_compare(sc, [1e-1, 1e-2, 1e-3], cfg.ensemble.master_seed)
    errs = ", ".join(f"{r['l2_difference']:.3e}" for r in rep.rows)
    report(request, 9, "monodomain limit", rep.passed, f"L2 differences {errs} strictly decreasing",
           time.perf_counter() - t0, 120)


def test_10_weak_residual(request):
    t0 = time.perf_counter()
    cfg = default_cfg()
    cfg.noise.v.strength = 0.0
    cfg.noise.w.strength = 0.0
    r1, r2, ratio = weak_residual_richardson(build_scenario(cfg), cfg.verify.weak_ell)
    report(request, 10, "weak-form residual Richardson ratio", 0.4 <= ratio <= 0.6,
           f"{r1:.3e} -> {r2:.3e}, ratio {ratio:.4f} in [0.4, 0.6]", time.perf_counter() - t0, 60)
