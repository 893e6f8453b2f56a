import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochbidomain.ensemble import (EnsembleSpec, EnsembleStats, FunctionalStats, PathFailure, PathScenario,
                                    pair_increments, pair_paths, run_ensemble, splitmix64, write_manifest)
from stochbidomain.galerkin import GalerkinConfig, solve_path
from stochbidomain.io import read_increments, write_increments
from stochbidomain.noise import Forcing, NoiseModel


def test_splitmix_reference_values():
    # reference outputs of splitmix64 seeded with 0 (Vigna's generator)
    assert splitmix64(0, 0) == 0xE220A8397B1DCDAF
    assert splitmix64(0, 1) == 0x6E789E6AA1B965F4
    assert splitmix64(0, 2) == 0x06C45D188009454F


def test_seeds_injective():
    seeds = EnsembleSpec(5000, 123).seeds()
    assert len(set(seeds)) == 5000


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40), st.integers(1, 39))
def test_stats_merge_matches_numpy(xs, cut):
    cut = min(cut, len(xs))
    whole = FunctionalStats.of(xs)
    merged = FunctionalStats.of(xs[:cut]).merge(FunctionalStats.of(xs[cut:]))
    assert whole.count == merged.count == len(xs)
    assert merged.mean == pytest.approx(np.mean(xs), abs=1e-9 * (1 + np.abs(xs).max()))
    if len(xs) > 1:
        assert merged.variance == pytest.approx(np.var(xs, ddof=1), rel=1e-7, abs=1e-6)
    assert merged.min == min(xs) and merged.max == max(xs)


def test_stats_merge_associative_given_order():
    parts = [FunctionalStats.of([1.0, 2.0]), FunctionalStats.of([5.0]), FunctionalStats.of([-3.0, 0.5, 7.0])]
    a = parts[0].merge(parts[1]).merge(parts[2])
    b = parts[0].merge(parts[1].merge(parts[2]))
    assert a.count == b.count and a.mean == pytest.approx(b.mean) and a.m2 == pytest.approx(b.m2)


def _scenario(geo8, fhn, T=0.05):
    v0 = np.linspace(0.5, 0.1, 8)
    cfg = GalerkinConfig(8, dt=1e-3, T=T, u_i0=v0)
    f = Forcing(NoiseModel(0.2, 1.0, 0.5), NoiseModel(0.1))
    return PathScenario(cfg, geo8, fhn, f, measure=lambda r: {"e": float(r.functionals(geo8)["energy"][-1])})


def test_single_path_stats_equal_functionals(geo8, fhn):
    sc = _scenario(geo8, fhn)
    spec = EnsembleSpec(1, 9)
    res = run_ensemble(spec, sc)
    vals, _ = sc.run(spec.seeds()[0])
    assert res.stats.mean("e") == vals["e"]
    assert res.stats.stats["e"].count == 1


def test_determinism_and_worker_independence(geo8, fhn):
    sc = _scenario(geo8, fhn)
    a = run_ensemble(EnsembleSpec(6, 4), sc)
    b = run_ensemble(EnsembleSpec(6, 4), sc)
    c = run_ensemble(EnsembleSpec(6, 4, workers=3), sc)
    assert a.stats.to_dict() == b.stats.to_dict() == c.stats.to_dict()


def test_deterministic_scenario_zero_variance(geo8, fhn):
    sc = _scenario(geo8, fhn)
    sc.forcing = Forcing()
    res = run_ensemble(EnsembleSpec(4, 1), sc)
    assert res.stats.stats["e"].variance == 0.0


def test_failure_propagates_index_and_seed():
    spec = EnsembleSpec(3, 2)

    def scenario(seed):
        if seed == spec.seeds()[1]:
            raise RuntimeError("boom")
        return {"x": 1.0}

    with pytest.raises(PathFailure) as exc:
        run_ensemble(spec, scenario)
    assert exc.value.index == 1 and exc.value.seed == spec.seeds()[1]


def test_pairs(geo8, fhn, tmp_path):
    spec = EnsembleSpec(8, 3, "common-increments")
    pairs = pair_paths(spec)
    assert len({p.stream_seed for p in pairs}) == 8
    assert len({p.seed_a for p in pairs} | {p.seed_b for p in pairs}) == 16
    with pytest.raises(ValueError):
        pair_paths(EnsembleSpec(2, 3))
    sc = _scenario(geo8, fhn)
    cfg = sc.config
    inc = pair_increments(pairs[0], 8, cfg.steps, cfg.dt)
    ra = solve_path(cfg, geo8, fhn, sc.forcing, increments=inc)
    rb = solve_path(cfg, geo8, fhn, sc.forcing, increments=inc)
    assert ra.equals(rb)
    write_increments(tmp_path / "pair.bin", inc)
    rc = solve_path(cfg, geo8, fhn, sc.forcing, increments=read_increments(tmp_path / "pair.bin"))
    assert rc.equals(ra)


def test_stderr_shrinks_like_inverse_sqrt(dn_domain, cond1d):
    from stochbidomain.galerkin import Geometry
    from stochbidomain.membrane import MembraneModel
    geo = Geometry.build(dn_domain, 1, cond1d)
    cfg = GalerkinConfig(1, 0.5, 1e-2, 0.2)
    sc = PathScenario(cfg, geo, MembraneModel().off(), Forcing(NoiseModel(0.5)),
                      measure=lambda r: {"v": float(r.c[-1, 0])})
    ms = np.array([64, 128, 256, 512, 1024, 2048])
    se = [run_ensemble(EnsembleSpec(int(m), 77), sc).stats.stderr("v") for m in ms]
    slope = np.polyfit(np.log(ms), np.log(se), 1)[0]
    assert abs(slope + 0.5) <= 0.1


def test_manifest(geo8, fhn, tmp_path):
    res = run_ensemble(EnsembleSpec(3, 5), _scenario(geo8, fhn))
    write_manifest(tmp_path / "m.json", res.manifest({"note": "x"}))
    m = json.loads((tmp_path / "m.json").read_text())
    assert [p["seed"] for p in m["per_path"]] == res.seeds
    assert m["stats"]["e"]["count"] == 3
