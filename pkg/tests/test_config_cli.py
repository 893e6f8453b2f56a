import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochbidomain.cli import dispatch, main
from stochbidomain.config import ConfigError, ScenarioConfig, build_scenario, parse_config, serialize_config
from stochbidomain.io import read_csv

SMALL = {"basis": {"n": 4}, "time": {"dt": 1e-3, "T": 0.05}, "ensemble": {"paths": 4},
         "verify": {"ladder": [4, 8], "min_paths": 4, "delta_steps": [1, 2, 4], "stability_pairs": 2}}


def test_minimal_config_defaults():
    cfg = parse_config("{}")
    assert cfg == ScenarioConfig()
    assert cfg.epsilon == "tied" and cfg.basis.n == 16 and cfg.time.dt == 1e-3
    assert cfg.domain.dirichlet_faces == ["x0"]
    assert cfg.initial.split == "intra"
    assert cfg.schema_version == 1


@pytest.mark.parametrize("text,where", [
    ('{"epsilon": 0}', "epsilon"),
    ('{"domain": {"dirichlet_faces": []}}', "domain.dirichlet_faces"),
    ('{"bogus": 1}', "bogus"),
    ('{"time": {"dt": 0.3, "T": 1.0}}', "time"),
    ('{"schema_version": 2}', "schema_version"),
    ('[1, 2]', "$"),
    ('{"basis": ', "$"),
])
def test_rejections_carry_key_paths(text, where):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert any(p.startswith(where) for p, _ in exc.value.violations), exc.value.violations


def test_dirichlet_message_cites_assumption():
    with pytest.raises(ConfigError, match="Sigma_D"):
        parse_config('{"domain": {"dirichlet_faces": []}}')


def test_all_violations_reported():
    with pytest.raises(ConfigError) as exc:
        parse_config('{"epsilon": -1, "basis": {"n": 0}, "extra": true}')
    assert len(exc.value.violations) >= 3


@given(st.integers(1, 64), st.one_of(st.just("tied"), st.floats(1e-6, 10.0)), st.floats(0.0, 2.0),
       st.sampled_from(["intra", "symmetric", "balanced"]), st.booleans())
def test_round_trip(n, eps, strength, split, enabled):
    cfg = ScenarioConfig()
    cfg.basis.n = n
    cfg.epsilon = eps
    cfg.noise.v.strength = strength
    cfg.initial.split = split
    cfg.membrane.enabled = enabled
    assert parse_config(serialize_config(cfg)) == cfg


def test_initial_splits():
    for split in ("intra", "symmetric", "balanced"):
        cfg = parse_config(json.dumps({"basis": {"n": 6}, "initial": {"split": split}}))
        c = build_scenario(cfg).config
        np.testing.assert_allclose(c.u_i0 - c.u_e0, build_scenario(parse_config('{"basis": {"n": 6}}')).config.v0,
                                   atol=1e-14)


def test_gaussian_perturbation_is_seeded():
    cfg = parse_config('{"basis": {"n": 6}, "initial": {"perturbation": {"law": "gaussian", "scale": 0.1}}}')
    sc = build_scenario(cfg)
    assert np.array_equal(sc.config_for(3).u_i0, sc.config_for(3).u_i0)
    assert not np.array_equal(sc.config_for(3).u_i0, sc.config_for(4).u_i0)


def _cfg(extra=None):
    d = json.loads(json.dumps(SMALL))
    for k, v in (extra or {}).items():
        d.setdefault(k, {}).update(v)
    return parse_config(json.dumps(d))


def test_check_structure(tmp_path):
    assert dispatch("check-structure", _cfg(), out=tmp_path, quiet=True) == 0
    rep = json.loads((tmp_path / "structure.json").read_text())
    assert all(m >= 0 for m in rep["margins"].values())
    assert rep["provenance"]["master_seed"] == 20240901
    assert rep["provenance"]["config"]["basis"]["n"] == 4


def test_simulate_rest_zero_noise(tmp_path):
    cfg = _cfg({"initial": {"profile": "rest"}, "noise": {"v": {"strength": 0.0}, "w": {"strength": 0.0}},
                "output": {"dump_increments": True, "full_states": True}})
    assert dispatch("simulate", cfg, out=tmp_path, quiet=True) == 0
    header, rows = read_csv(tmp_path / "energy.csv")
    assert header[0] == "t" and len(rows) == 51
    assert all(float(x) == 0.0 for r in rows for x in r[1:])
    assert (tmp_path / "increments.bin.json").exists()
    assert (tmp_path / "states.csv").exists()
    assert b"\r\n" in (tmp_path / "energy.csv").read_bytes()


def test_stability_s0_row_zero(tmp_path):
    assert dispatch("verify-stability", _cfg(), out=tmp_path, quiet=True) == 0
    rows = json.loads((tmp_path / "stability.json").read_text())["rows"]
    assert [r["difference"] for r in rows if r["s"] == 0.0] == [0.0]
    header, csv_rows = read_csv(tmp_path / "stability.csv")
    assert "difference" in header


@pytest.mark.parametrize("sub", ["ensemble", "verify-energy", "verify-moments", "verify-translation",
                                 "verify-monodomain"])
def test_other_subcommands_write_artifacts(sub, tmp_path):
    code = dispatch(sub, _cfg(), out=tmp_path, paths=4, quiet=True)
    assert code in (0, 1)
    assert any(tmp_path.iterdir())


def test_unknown_subcommand(tmp_path):
    with pytest.raises(ValueError):
        dispatch("frobnicate", _cfg(), out=tmp_path)


def test_main_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"epsilon": 0}')
    assert main(["check-structure", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["check-structure", "--config", str(tmp_path / "missing.json")]) == 3
    good = tmp_path / "good.json"
    good.write_text(json.dumps(SMALL))
    assert main(["check-structure", "--config", str(good), "--out", str(tmp_path / "o"), "--quiet"]) == 0
    assert main(["simulate", "--config", str(good), "--out", str(tmp_path / "s"), "--seed", "5", "--quiet"]) == 0
    assert main(["ensemble", "--config", str(good), "--paths", "0"]) == 2
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "stochbidomain", "check-structure", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "PASS" in out.stdout
