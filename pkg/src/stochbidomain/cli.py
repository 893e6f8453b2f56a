"""Command-line dispatcher: ``stochbidomain <subcommand> [--config PATH] [--seed N] [--out DIR] [--paths M] [--quiet]``.

Exit status is 0 iff every gate of the subcommand passed, 1 if a gate failed
or a path aborted, 2 for usage/config errors and 3 for I/O failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import (ConfigError, ScenarioConfig, build_membrane, build_scenario, ensemble_spec,
                     load_config)
from .ensemble import EnsembleSpec, PathFailure, run_ensemble, write_manifest
from .galerkin import BlowUpError
from .io import provenance, write_csv, write_energy_csv, write_increments, write_json, write_states_csv
from .membrane import check_structural_bounds
from .verify import (EstimateReport, energy_suite, monodomain_compare, moment_suite, path_functionals,
                     run_ladder, stability_suite, translation_suite)

SUBCOMMANDS = ("simulate", "ensemble", "verify-energy", "verify-moments", "verify-translation",
               "verify-stability", "verify-monodomain", "check-structure")
CONSISTENCY_TOL = 1e-10


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochbidomain", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", type=Path, help="JSON scenario config (defaults if omitted)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", type=Path, help="output directory (default: config output.dir)")
    p.add_argument("--paths", type=int, help="override the ensemble size")
    p.add_argument("--quiet", action="store_true")
    return p


class _Run:
    def __init__(self, cfg: ScenarioConfig, seed: int, out: Path, paths: int | None, quiet: bool):
        self.cfg, self.seed, self.out, self.paths, self.quiet = cfg, seed, out, paths, quiet

    def say(self, msg: str) -> None:
        if not self.quiet:
            print(msg)

    def prov(self, **extra) -> dict:
        return provenance(self.cfg.model_dump(mode="json"), self.seed, **extra)

    def report(self, rep: EstimateReport, stem: str) -> int:
        write_json(self.out / f"{stem}.json", {**rep.to_dict(), "provenance": self.prov()})
        (self.out / f"{stem}.csv").write_text(rep.to_csv(), encoding="utf-8")
        for gate, ok in rep.gates.items():
            self.say(f"{'PASS' if ok else 'FAIL'}  {rep.estimate}:{gate}")
        return 0 if rep.passed else 1


def _simulate(r: _Run) -> int:
    sc = build_scenario(r.cfg)
    rec = sc.solve(r.seed)
    write_energy_csv(r.out / "energy.csv", rec, sc.geometry)
    if r.cfg.output.full_states:
        write_states_csv(r.out / "states.csv", rec)
    extra = {}
    if r.cfg.output.dump_increments:
        write_increments(r.out / "increments.bin", rec.increments)
        extra["increments"] = "increments.bin"
    defect = float(rec.consistency_defect().max())
    ok = defect <= CONSISTENCY_TOL
    write_json(r.out / "manifest.json", r.prov(subcommand="simulate", path_seed=r.seed,
                                                consistency_defect=defect, gates={"consistency": ok}, **extra))
    r.say(f"{'PASS' if ok else 'FAIL'}  simulate:consistency ({defect:.3e})")
    return 0 if ok else 1


def _ensemble(r: _Run) -> int:
    sc = build_scenario(r.cfg)
    geo = sc.geometry
    sc.measure = lambda rec: path_functionals(rec, geo)
    spec = ensemble_spec(r.cfg, r.paths, r.seed)
    res = run_ensemble(spec, sc)
    write_manifest(r.out / "manifest.json", res.manifest({"provenance": r.prov(subcommand="ensemble")}))
    keys = list(res.stats.stats)
    write_csv(r.out / "stats.csv", ["functional", "count", "mean", "variance", "stderr", "min", "max"],
              [[k, *res.stats.stats[k].to_dict().values()] for k in keys])
    r.say(f"PASS  ensemble: {spec.paths} paths")
    return 0


def _verify_ladder(r: _Run, which: str) -> int:
    v = r.cfg.verify
    spec = ensemble_spec(r.cfg, r.paths, r.seed)
    ladder = run_ladder(lambda n: build_scenario(r.cfg, n), v.ladder, spec)
    if which == "energy":
        rep = energy_suite(ladder, v.energy_growth, v.min_paths)
    else:
        rep = moment_suite(ladder, v.q0, v.moment_growth, v.min_paths)
    return r.report(rep, which)


def _verify_translation(r: _Run) -> int:
    sc = build_scenario(r.cfg)
    h = r.cfg.time.dt * r.cfg.time.stride
    deltas = [m * h for m in r.cfg.verify.delta_steps]
    rep = translation_suite(sc, deltas, ensemble_spec(r.cfg, r.paths, r.seed), min_paths=r.cfg.verify.min_paths)
    return r.report(rep, "translation")


def _verify_stability(r: _Run) -> int:
    v = r.cfg.verify
    sc = build_scenario(r.cfg)
    spec = EnsembleSpec(r.paths or v.stability_pairs, r.seed, "common-increments", (), r.cfg.ensemble.workers)
    return r.report(stability_suite(sc, v.stability_sizes, spec), "stability")


def _verify_monodomain(r: _Run) -> int:
    sc = build_scenario(r.cfg)
    return r.report(monodomain_compare(sc, r.cfg.verify.monodomain_epsilons, r.seed), "monodomain")


def _check_structure(r: _Run) -> int:
    model = build_membrane(r.cfg)
    rep = check_structural_bounds(model, w_range=(-10.0, 10.0))
    write_json(r.out / "structure.json", {**rep.to_dict(), "provenance": r.prov(subcommand="check-structure")})
    for name, m in rep.margins.items():
        r.say(f"{'PASS' if m >= 0 else 'FAIL'}  structure:{name} (margin {m:.6g})")
    return 0 if rep.ok else 1


HANDLERS = {
    "simulate": _simulate,
    "ensemble": _ensemble,
    "verify-energy": lambda r: _verify_ladder(r, "energy"),
    "verify-moments": lambda r: _verify_ladder(r, "moments"),
    "verify-translation": _verify_translation,
    "verify-stability": _verify_stability,
    "verify-monodomain": _verify_monodomain,
    "check-structure": _check_structure,
}


def dispatch(subcommand: str, cfg: ScenarioConfig, seed: int | None = None, out: Path | None = None,
             paths: int | None = None, quiet: bool = False) -> int:
    if subcommand not in HANDLERS:
        raise ValueError(f"unknown subcommand {subcommand!r}; choose from {SUBCOMMANDS}")
    out = Path(cfg.output.dir if out is None else out)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.ensemble.master_seed if seed is None else seed
    return HANDLERS[subcommand](_Run(cfg, seed, out, paths, quiet))


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = ScenarioConfig() if args.config is None else load_config(args.config)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 3
    if args.paths is not None and args.paths < 1:
        print("--paths must be >= 1", file=sys.stderr)
        return 2
    try:
        return dispatch(args.subcommand, cfg, args.seed, args.out, args.paths, args.quiet)
    except (PathFailure, BlowUpError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
