"""Seeded Monte Carlo orchestration.

Per-path seeds are the splitmix64 stream of the master seed: path i gets
``mix(master + (i + 1) * GOLDEN)`` (mod 2^64). ``mix`` is a bijection on
64-bit integers, so seeds are injective in the path index for a fixed master
seed. Statistics are merged in path-index order regardless of how many worker
threads ran the paths, so results are bit-reproducible.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .galerkin import GalerkinConfig, Geometry, TrajectoryRecord, solve_path
from .membrane import MembraneModel
from .noise import Forcing, WienerIncrements, sample_increments

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
PAIR_TAG = 0xA5A5_5A5A_C3C3_3C3C
PAIRINGS = ("independent", "common-increments")


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def splitmix64(master_seed: int, index: int) -> int:
    """The ``index``-th output (0-based) of splitmix64 started at ``master_seed``."""
    if index < 0:
        raise ValueError("path index must be nonnegative")
    return _mix((int(master_seed) + (index + 1) * GOLDEN) & MASK64)


@dataclass(frozen=True)
class EnsembleSpec:
    paths: int
    master_seed: int = 0
    pairing: str = "independent"
    functionals: tuple[str, ...] = ()
    workers: int = 1

    def __post_init__(self):
        if self.paths < 1:
            raise ValueError("paths must be >= 1")
        if self.pairing not in PAIRINGS:
            raise ValueError(f"pairing must be one of {PAIRINGS}, got {self.pairing!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def seeds(self) -> list[int]:
        return [splitmix64(self.master_seed, i) for i in range(self.paths)]


@dataclass
class FunctionalStats:
    """Running count / mean / M2 / min / max (Chan et al. pairwise merge)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    min: float = math.inf
    max: float = -math.inf

    @classmethod
    def of(cls, values: Iterable[float]) -> "FunctionalStats":
        out = cls()
        for x in values:
            out = out.merge(cls(1, float(x), 0.0, float(x), float(x)))
        return out

    def merge(self, other: "FunctionalStats") -> "FunctionalStats":
        if other.count == 0:
            return FunctionalStats(self.count, self.mean, self.m2, self.min, self.max)
        if self.count == 0:
            return FunctionalStats(other.count, other.mean, other.m2, other.min, other.max)
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return FunctionalStats(n, mean, m2, min(self.min, other.min), max(self.max, other.max))

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 0 else math.nan

    def to_dict(self) -> dict:
        return {"count": self.count, "mean": self.mean, "variance": self.variance,
                "stderr": self.stderr, "min": self.min, "max": self.max}


@dataclass
class EnsembleStats:
    stats: dict[str, FunctionalStats] = field(default_factory=dict)

    @property
    def count(self) -> int:
        return max((s.count for s in self.stats.values()), default=0)

    @classmethod
    def of_path(cls, values: Mapping[str, float]) -> "EnsembleStats":
        return cls({k: FunctionalStats(1, float(v), 0.0, float(v), float(v)) for k, v in values.items()})

    def merge(self, other: "EnsembleStats") -> "EnsembleStats":
        keys = list(self.stats) + [k for k in other.stats if k not in self.stats]
        empty = FunctionalStats()
        return EnsembleStats({k: self.stats.get(k, empty).merge(other.stats.get(k, empty)) for k in keys})

    def mean(self, key: str) -> float:
        return self.stats[key].mean

    def stderr(self, key: str) -> float:
        return self.stats[key].stderr

    def to_dict(self) -> dict:
        return {k: s.to_dict() for k, s in self.stats.items()}


class PathFailure(RuntimeError):
    def __init__(self, index: int, seed: int, cause: BaseException):
        self.index, self.seed, self.cause = index, seed, cause
        super().__init__(f"path {index} (seed {seed}) failed: {cause}")


@dataclass
class EnsembleResult:
    spec: EnsembleSpec
    stats: EnsembleStats
    seeds: list[int]
    values: list[dict]
    records: list[TrajectoryRecord] | None = None

    def column(self, key: str) -> np.ndarray:
        return np.array([v[key] for v in self.values])

    def manifest(self, extra: dict | None = None) -> dict:
        out = {"paths": self.spec.paths, "master_seed": self.spec.master_seed,
               "pairing": self.spec.pairing,
               "per_path": [{"index": i, "seed": s, "outcome": "ok"} for i, s in enumerate(self.seeds)],
               "stats": self.stats.to_dict()}
        if extra:
            out.update(extra)
        return out


@dataclass
class PathScenario:
    """Everything needed to run one path from a seed.

    ``initial`` optionally maps a path seed to ``(u_i0, u_e0, w0)`` (random
    initial data); ``measure`` maps a finished record to scalar functionals.
    """

    config: GalerkinConfig
    geometry: Geometry
    membrane: MembraneModel
    forcing: Forcing
    measure: Callable[[TrajectoryRecord], dict] | None = None
    initial: Callable[[int], tuple] | None = None

    def config_for(self, seed: int) -> GalerkinConfig:
        if self.initial is None:
            return self.config
        u_i0, u_e0, w0 = self.initial(seed)
        c = self.config
        return GalerkinConfig(c.n, c.epsilon, c.dt, c.T, c.stepper, u_i0, u_e0, w0, c.stride, c.blowup)

    def solve(self, seed: int, increments: WienerIncrements | None = None) -> TrajectoryRecord:
        return solve_path(self.config_for(seed), self.geometry, self.membrane, self.forcing,
                          seed=seed, increments=increments)

    def run(self, seed: int) -> tuple[dict, TrajectoryRecord]:
        rec = self.solve(seed)
        values = {} if self.measure is None else dict(self.measure(rec))
        return values, rec


def _run_one(scenario, seed: int):
    if hasattr(scenario, "run"):
        return scenario.run(seed)
    return dict(scenario(seed)), None


def run_ensemble(spec: EnsembleSpec, scenario, keep_records: bool = False) -> EnsembleResult:
    """Run ``spec.paths`` paths and merge their functionals in index order.

    ``scenario`` is a PathScenario or any callable ``seed -> dict``. A failing
    path raises PathFailure carrying its index and seed.
    """
    seeds = spec.seeds()

    def task(i: int):
        try:
            return _run_one(scenario, seeds[i])
        except Exception as exc:  # noqa: BLE001 - re-raised with provenance
            raise PathFailure(i, seeds[i], exc) from exc

    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            futures = [pool.submit(task, i) for i in range(spec.paths)]
            outputs = []
            for f in futures:
                outputs.append(f.result())
    else:
        outputs = [task(i) for i in range(spec.paths)]

    stats = EnsembleStats()
    values = []
    for vals, _ in outputs:
        if spec.functionals:
            vals = {k: vals[k] for k in spec.functionals}
        values.append(vals)
        stats = stats.merge(EnsembleStats.of_path(vals))
    records = [rec for _, rec in outputs] if keep_records else None
    return EnsembleResult(spec, stats, seeds, values, records)


@dataclass(frozen=True)
class PathPair:
    index: int
    seed_a: int
    seed_b: int
    stream_seed: int


def pair_paths(spec: EnsembleSpec) -> list[PathPair]:
    """Pairs for common-random-number comparisons.

    Both members of pair p draw their increments from ``stream_seed``; ``seed_a``
    and ``seed_b`` are distinct auxiliary seeds (e.g. for random initial data).
    """
    if spec.pairing != "common-increments":
        raise ValueError("pair_paths needs pairing='common-increments'")
    return [PathPair(p, splitmix64(spec.master_seed, 2 * p), splitmix64(spec.master_seed, 2 * p + 1),
                     splitmix64(spec.master_seed ^ PAIR_TAG, p))
            for p in range(spec.paths)]


def pair_increments(pair: PathPair, n: int, steps: int, dt: float) -> WienerIncrements:
    return sample_increments(n, steps, dt, pair.stream_seed)


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
