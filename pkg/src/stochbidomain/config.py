"""Versioned JSON scenario configuration and the scenario builder."""

from __future__ import annotations

import json
import math
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .ensemble import EnsembleSpec, PathScenario
from .galerkin import GalerkinConfig, Geometry
from .geometry import FACES, ConductivityField, Domain, project
from .membrane import MembraneModel
from .noise import STREAM_INIT, Forcing, NoiseModel

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """All violations found while loading a config, each as ``(key path, message)``."""

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = violations
        super().__init__("invalid config:\n" + "\n".join(f"  {p}: {m}" for p, m in violations))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class DomainSpec(_Strict):
    lengths: list[float] = Field(default_factory=lambda: [1.0], min_length=1, max_length=2)
    dirichlet_faces: list[str] = Field(default_factory=lambda: ["x0"])

    @field_validator("lengths")
    @classmethod
    def _positive(cls, v):
        if any(not (x > 0) for x in v):
            raise ValueError("domain lengths must be positive")
        return v

    @field_validator("dirichlet_faces")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("the Dirichlet boundary part must be nonempty (Sigma_D != empty is required for the Poincare bound)")
        return v

    @model_validator(mode="after")
    def _faces_known(self):
        known = FACES[len(self.lengths)]
        bad = [f for f in self.dirichlet_faces if f not in known]
        if bad:
            raise ValueError(f"unknown faces {bad} for a {len(self.lengths)}D box (known: {list(known)})")
        return self


class BasisSpec(_Strict):
    n: int = Field(16, ge=1)
    quad_order: Optional[int] = Field(None, ge=2)


class ConductivitySpec(_Strict):
    sigma_l_i: float = Field(1.0, gt=0)
    sigma_t_i: float = Field(0.5, gt=0)
    sigma_l_e: float = Field(2.0, gt=0)
    sigma_t_e: float = Field(1.0, gt=0)
    fiber_angle: float = 0.0


class MembraneSpec(_Strict):
    a: float = Field(0.1, gt=0, lt=1)
    eps: float = Field(0.01, gt=0)
    kappa: float = 1.0
    gamma: float = 0.5
    c_I3: float = 1.0
    c_lower_I: float = Field(0.5, gt=0, le=1)
    enabled: bool = True


class NoiseSpec(_Strict):
    strength: float = Field(0.0, ge=0)
    b0: float = 1.0
    b1: float = 0.0
    profile: Literal["uniform", "modal"] = "uniform"


class NoisePair(_Strict):
    v: NoiseSpec = Field(default_factory=lambda: NoiseSpec(strength=0.1, b0=1.0, b1=0.5))
    w: NoiseSpec = Field(default_factory=lambda: NoiseSpec(strength=0.05))


class PerturbationSpec(_Strict):
    law: Literal["none", "gaussian"] = "none"
    scale: float = Field(0.0, ge=0)


class InitialSpec(_Strict):
    profile: Literal["rest", "gaussian-bump"] = "gaussian-bump"
    amplitude: float = 1.0
    center: list[float] = Field(default_factory=lambda: [0.5])
    width: float = Field(0.2, gt=0)
    split: Literal["intra", "symmetric", "balanced"] = "intra"
    w_amplitude: float = 0.0
    perturbation: PerturbationSpec = Field(default_factory=PerturbationSpec)


class TimeSpec(_Strict):
    dt: float = Field(1e-3, gt=0)
    T: float = Field(1.0, gt=0)
    stepper: Literal["euler-maruyama", "semi-implicit"] = "semi-implicit"
    stride: int = Field(1, ge=1)
    blowup: float = Field(1e6, gt=0)

    @model_validator(mode="after")
    def _grid(self):
        if self.T < self.dt:
            raise ValueError("need T >= dt")
        steps = round(self.T / self.dt)
        if abs(steps * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError("T must be an integer multiple of dt")
        if steps % self.stride:
            raise ValueError(f"stride {self.stride} must divide the step count {steps}")
        return self


class EnsembleConfig(_Strict):
    paths: int = Field(64, ge=1)
    master_seed: int = Field(20240901, ge=0)
    workers: int = Field(1, ge=1)


class VerifyConfig(_Strict):
    ladder: list[int] = Field(default_factory=lambda: [8, 16, 32], min_length=2)
    energy_growth: float = Field(1.25, gt=0)
    moment_growth: float = Field(1.35, gt=0)
    q0: float = Field(5.0, ge=2)
    min_paths: int = Field(16, ge=1)
    delta_steps: list[int] = Field(default_factory=lambda: [2, 4, 8, 16], min_length=3)
    stability_sizes: list[float] = Field(default_factory=lambda: [0.0, 1e-2, 1e-3, 1e-4])
    stability_pairs: int = Field(32, ge=1)
    monodomain_epsilons: list[float] = Field(default_factory=lambda: [1e-1, 1e-2, 1e-3], min_length=2)
    weak_ell: int = Field(1, ge=1)

    @field_validator("monodomain_epsilons")
    @classmethod
    def _eps_positive(cls, v):
        if any(not (e > 0) for e in v):
            raise ValueError("epsilon must be > 0")
        return v


class OutputSpec(_Strict):
    dir: str = "out"
    dump_increments: bool = False
    full_states: bool = False


class ScenarioConfig(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    domain: DomainSpec = Field(default_factory=DomainSpec)
    basis: BasisSpec = Field(default_factory=BasisSpec)
    conductivity: ConductivitySpec = Field(default_factory=ConductivitySpec)
    epsilon: Union[Literal["tied"], float] = "tied"
    membrane: MembraneSpec = Field(default_factory=MembraneSpec)
    noise: NoisePair = Field(default_factory=NoisePair)
    initial: InitialSpec = Field(default_factory=InitialSpec)
    time: TimeSpec = Field(default_factory=TimeSpec)
    ensemble: EnsembleConfig = Field(default_factory=EnsembleConfig)
    verify: VerifyConfig = Field(default_factory=VerifyConfig)
    output: OutputSpec = Field(default_factory=OutputSpec)

    @field_validator("epsilon")
    @classmethod
    def _epsilon(cls, v):
        if isinstance(v, str):
            return v
        if not (v > 0) or not math.isfinite(v):
            raise ValueError("epsilon must be 'tied' or a finite number > 0")
        return float(v)

    @model_validator(mode="after")
    def _center_dim(self):
        if len(self.initial.center) != len(self.domain.lengths):
            raise ValueError(f"initial.center has {len(self.initial.center)} entries for a "
                             f"{len(self.domain.lengths)}D domain")
        return self


def _loc(err: dict) -> str:
    parts = [str(p) for p in err.get("loc", ()) if not str(p).startswith(("function-", "literal["))]
    return ".".join(parts) or "$"


def parse_config(text: str) -> ScenarioConfig:
    """Validate JSON text; raises ConfigError listing every violation with its key path."""
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError([("$", f"malformed JSON: {exc}")]) from exc
    if not isinstance(data, dict):
        raise ConfigError([("$", "top level must be a JSON object")])
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        seen, out = set(), []
        for e in exc.errors():
            item = (_loc(e), e["msg"])
            if item not in seen:
                seen.add(item)
                out.append(item)
        raise ConfigError(out) from None


def serialize_config(cfg: ScenarioConfig) -> str:
    return cfg.model_dump_json(indent=2)


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# building ----------------------------------------------------------------------

def build_domain(cfg: ScenarioConfig) -> Domain:
    return Domain(tuple(cfg.domain.lengths), frozenset(cfg.domain.dirichlet_faces))


def build_conductivity(cfg: ScenarioConfig) -> ConductivityField:
    c = cfg.conductivity
    return ConductivityField(len(cfg.domain.lengths), c.sigma_l_i, c.sigma_t_i, c.sigma_l_e, c.sigma_t_e,
                             fiber_angle=c.fiber_angle)


def build_membrane(cfg: ScenarioConfig) -> MembraneModel:
    m = cfg.membrane
    return MembraneModel(a=m.a, eps=m.eps, kappa=m.kappa, gamma=m.gamma, c_I3=m.c_I3,
                         c_lower_I=m.c_lower_I, enabled=m.enabled)


def build_forcing(cfg: ScenarioConfig) -> Forcing:
    v, w = cfg.noise.v, cfg.noise.w
    return Forcing(NoiseModel(v.strength, v.b0, v.b1, v.profile), NoiseModel(w.strength, w.b0, w.b1, w.profile))


def initial_coefficients(cfg: ScenarioConfig, geometry: Geometry) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(u_i0, u_e0, w0)`` from the preset profile and split rule."""
    n = geometry.n
    ini = cfg.initial
    if ini.profile == "rest":
        v0 = np.zeros(n)
    else:
        center = np.asarray(ini.center)

        def bump(x):
            return ini.amplitude * np.exp(-np.sum(((x - center) / ini.width) ** 2, axis=1))

        v0 = project(bump, geometry.basis)
    w0 = ini.w_amplitude * v0
    if ini.split == "intra":
        return v0, np.zeros(n), w0
    if ini.split == "symmetric":
        return 0.5 * v0, -0.5 * v0, w0
    lam = geometry.conductivity.proportionality()
    if lam is None:
        raise ValueError("the balanced split needs proportional conductivities")
    return v0 / (1 + lam), -lam * v0 / (1 + lam), w0


def epsilon_value(cfg: ScenarioConfig, n: int) -> float:
    return 1.0 / n if cfg.epsilon == "tied" else float(cfg.epsilon)


def build_scenario(cfg: ScenarioConfig, n: int | None = None) -> PathScenario:
    """PathScenario for the config at basis size ``n`` (default ``cfg.basis.n``)."""
    n = cfg.basis.n if n is None else int(n)
    geometry = Geometry.build(build_domain(cfg), n, build_conductivity(cfg), cfg.basis.quad_order)
    u_i0, u_e0, w0 = initial_coefficients(cfg, geometry)
    t = cfg.time
    gcfg = GalerkinConfig(n, epsilon_value(cfg, n), t.dt, t.T, t.stepper, u_i0, u_e0, w0, t.stride, t.blowup)
    initial = None
    pert = cfg.initial.perturbation
    if pert.law == "gaussian" and pert.scale > 0:
        decay = 1.0 / np.arange(1, n + 1)

        def initial(seed: int, base=(u_i0, u_e0, w0)):
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(STREAM_INIT,))))
            dv = pert.scale * decay * rng.standard_normal(n)
            dw = pert.scale * decay * rng.standard_normal(n)
            return base[0] + dv, base[1], base[2] + dw

    return PathScenario(gcfg, geometry, build_membrane(cfg), build_forcing(cfg), initial=initial)


def ensemble_spec(cfg: ScenarioConfig, paths: int | None = None, seed: int | None = None,
                  pairing: str = "independent") -> EnsembleSpec:
    e = cfg.ensemble
    return EnsembleSpec(e.paths if paths is None else paths, e.master_seed if seed is None else seed,
                        pairing, (), e.workers)
