"""Monte Carlo checks of the a-priori estimates, stability and the monodomain limit."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.linalg import expm

from .ensemble import (EnsembleResult, EnsembleSpec, PathScenario, pair_increments, pair_paths,
                       run_ensemble)
from .galerkin import (BidomainGalerkin, GalerkinConfig, Geometry, TrajectoryRecord,
                       solve_monodomain_path, solve_path)
from .membrane import MembraneModel
from .noise import STREAM_INIT, Forcing, sample_increments

ENERGY_KEYS = ("sup_v_sq", "sup_w_sq", "sup_eps_ui_sq", "sup_eps_ue_sq", "grad_ui", "grad_ue", "v4")
BOOTSTRAP_RESAMPLES = 200


@dataclass
class EstimateReport:
    """Measured values, gates and provenance of one verification run."""

    estimate: str
    rows: list[dict]
    gates: dict[str, bool]
    paths: int
    master_seed: int | None
    seeds: list[int] = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.gates.values())

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "passed": self.passed, "gates": self.gates,
                "paths": self.paths, "master_seed": self.master_seed, "seeds": self.seeds,
                "slopes": self.slopes, "params": self.params, "runtime_s": self.runtime,
                "rows": self.rows}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), default=_json_default, **kw)

    def to_csv(self) -> str:
        """Rows as RFC-4180 CSV; every row repeats the ensemble size and master seed."""
        cols = ["paths", "master_seed"]
        for r in self.rows:
            cols += [k for k in r if k not in cols]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\r\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({"paths": self.paths, "master_seed": self.master_seed,
                        **{k: _fmt(v) for k, v in r.items()}})
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def _trapezoid(values: np.ndarray, times: np.ndarray) -> float:
    return float(np.sum(0.5 * np.diff(times) * (values[1:] + values[:-1])))


def path_functionals(record: TrajectoryRecord, geometry: Geometry) -> dict:
    """Sup-in-time norms and space-time integrals of one path (sup over snapshots)."""
    f = record.functionals(geometry)
    t = record.times
    return {
        "sup_v_sq": float(f["v_sq"].max()),
        "sup_w_sq": float(f["w_sq"].max()),
        "sup_eps_ui_sq": float(f["eps_ui_sq"].max()),
        "sup_eps_ue_sq": float(f["eps_ue_sq"].max()),
        "grad_ui": _trapezoid(f["grad_ui_sq"], t),
        "grad_ue": _trapezoid(f["grad_ue_sq"], t),
        "v4": _trapezoid(f["v4"], t),
    }


def run_ladder(build: Callable[[int], PathScenario], ns: Sequence[int], spec: EnsembleSpec) -> dict[int, EnsembleResult]:
    """Same ensemble spec (so nested increments) at each truncation level."""
    out = {}
    for n in ns:
        sc = build(n)
        geo = sc.geometry
        sc.measure = lambda rec, geo=geo: path_functionals(rec, geo)
        out[n] = run_ensemble(spec, sc)
    return out


def _growth_rows(ladder: Mapping[int, EnsembleResult], keys: Sequence[str], transform, limit: float):
    ns = sorted(ladder)
    rows, gates = [], {}
    for n in ns:
        res = ladder[n]
        for k in keys:
            x = transform(res.column(k))
            rows.append({"n": n, "estimate": k, "mean": float(x.mean()),
                         "stderr": float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0})
    for lo, hi in zip(ns[:-1], ns[1:]):
        for k in keys:
            a = float(transform(ladder[lo].column(k)).mean())
            b = float(transform(ladder[hi].column(k)).mean())
            ratio = 1.0 if a == 0.0 and b == 0.0 else (b / a if a > 0 else math.inf)
            rows.append({"n": f"{lo}->{hi}", "estimate": k, "growth": ratio, "limit": limit})
            gates[f"{k}:{lo}->{hi}"] = ratio <= limit
    return rows, gates


def _check_ladder(ladder: Mapping[int, EnsembleResult], min_paths: int):
    if not ladder:
        raise ValueError("empty ladder")
    sizes = {n: r.spec.paths for n, r in ladder.items()}
    if min(sizes.values()) < min_paths:
        raise ValueError(f"ensemble too small: {sizes} paths, need at least {min_paths}")
    seeds = {r.spec.master_seed for r in ladder.values()}
    return next(iter(ladder.values())), sorted(seeds)


def energy_suite(ladder: Mapping[int, EnsembleResult], growth_limit: float = 1.25, min_paths: int = 16) -> EstimateReport:
    """E sup ||v||^2, E sup ||w||^2, E sup eps||u_j||^2, E int||grad u_j||^2, E int int v^4 per n,
    gated on the growth factor between consecutive ladder levels."""
    t0 = time.perf_counter()
    first, seeds = _check_ladder(ladder, min_paths)
    rows, gates = _growth_rows(ladder, ENERGY_KEYS, lambda x: x, growth_limit)
    return EstimateReport("energy", rows, gates, first.spec.paths, first.spec.master_seed, first.seeds,
                          params={"ns": sorted(ladder), "growth_limit": growth_limit, "master_seeds": seeds},
                          runtime=time.perf_counter() - t0)


def moment_suite(ladder: Mapping[int, EnsembleResult], q0: float = 5.0, growth_limit: float = 1.35,
                 min_paths: int = 16) -> EstimateReport:
    """q0-th moments of the same norms (each energy functional raised to q0/2)."""
    if q0 < 2:
        raise ValueError("moment order q0 must be >= 2")
    t0 = time.perf_counter()
    first, seeds = _check_ladder(ladder, min_paths)
    keys = ("sup_v_sq", "sup_w_sq", "grad_ui", "grad_ue", "v4")
    rows, gates = _growth_rows(ladder, keys, lambda x: x ** (q0 / 2.0), growth_limit)
    return EstimateReport("moments", rows, gates, first.spec.paths, first.spec.master_seed, first.seeds,
                          params={"ns": sorted(ladder), "q0": q0, "growth_limit": growth_limit},
                          runtime=time.perf_counter() - t0)


# linear oracle ---------------------------------------------------------------

def linear_second_moment(problem: BidomainGalerkin, C0: np.ndarray, t: float) -> np.ndarray:
    """Exact ``E[C(t) C(t)^T]`` of ``dC = L C dt + G dW`` for state-independent G (Van Loan)."""
    L = problem.linear_operator()
    G = problem.diffusion(np.zeros(4 * problem.n))
    d = L.shape[0]
    block = np.zeros((2 * d, 2 * d))
    block[:d, :d] = -L
    block[:d, d:] = G @ G.T
    block[d:, d:] = L.T
    E = expm(block * t)
    Phi = E[d:, d:].T
    P = Phi @ E[:d, d:]
    m = expm(L * t) @ np.asarray(C0, dtype=float)
    return 0.5 * (P + P.T) + np.outer(m, m)


def linear_oracle_check(scenario: PathScenario, spec: EnsembleSpec, n_se: float = 3.0) -> EstimateReport:
    """MC ``E ||v(T)||^2`` against the exact linear second moment (membrane off, additive noise)."""
    if scenario.membrane.enabled or not scenario.forcing.is_additive:
        raise ValueError("the linear oracle needs the membrane off and additive noise")
    t0 = time.perf_counter()
    n = scenario.config.n
    scenario.measure = lambda rec: {"v_sq_T": float(np.sum(rec.c[-1] ** 2))}
    res = run_ensemble(spec, scenario)
    problem = BidomainGalerkin.from_geometry(scenario.geometry, scenario.membrane, scenario.forcing,
                                             scenario.config.eps)
    S = linear_second_moment(problem, scenario.config.initial_vector(), scenario.config.T)
    exact = float(np.trace(S[:n, :n]))
    st = res.stats.stats["v_sq_T"]
    z = abs(st.mean - exact) / st.stderr if st.stderr > 0 else (0.0 if st.mean == exact else math.inf)
    row = {"exact": exact, "mc_mean": st.mean, "stderr": st.stderr, "z": z}
    return EstimateReport("linear-oracle", [row], {"within_se": z <= n_se}, spec.paths, spec.master_seed,
                          res.seeds, params={"n_se": n_se, "T": scenario.config.T},
                          runtime=time.perf_counter() - t0)


# translation -----------------------------------------------------------------

def translation_statistic(record: TrajectoryRecord, delta_steps: int, block: str = "v") -> float:
    """``sup_{tau <= delta} int_0^{T - tau} ||u(t + tau) - u(t)||^2 dt`` over snapshot shifts."""
    X = record.c if block == "v" else record.a
    if delta_steps < 0:
        raise ValueError("delta must be nonnegative")
    if delta_steps == 0:
        return 0.0
    h = record.times[1] - record.times[0]
    if delta_steps >= X.shape[0]:
        raise ValueError("delta exceeds the trajectory length")
    best = 0.0
    for m in range(1, delta_steps + 1):
        d = X[m:] - X[:-m]
        best = max(best, float(h * np.sum(d**2)))
    return best


def _ols_slope(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(x, y, 1)[0])


def translation_suite(scenario: PathScenario, deltas: Sequence[float], spec: EnsembleSpec,
                      thresholds: Mapping[str, float] | None = None, min_paths: int = 16) -> EstimateReport:
    """Log-log slope of the translation statistic in delta with a bootstrap CI over paths.

    Passes for each variable iff ``slope >= threshold - CI half-width``.
    """
    thresholds = {"v": 0.25, "w": 0.5} if thresholds is None else dict(thresholds)
    deltas = [float(d) for d in deltas]
    if len(deltas) < 3:
        raise ValueError("need at least 3 deltas to fit a slope")
    if spec.paths < min_paths:
        raise ValueError(f"ensemble too small: {spec.paths} paths, need at least {min_paths}")
    cfg = scenario.config
    h = cfg.dt * cfg.stride
    steps = []
    for d in deltas:
        m = round(d / h)
        if m <= 0 or abs(m * h - d) > 1e-9 * max(d, h):
            raise ValueError(f"delta {d} is not a positive multiple of the snapshot spacing {h}")
        if d > cfg.T / 4 + 1e-12:
            raise ValueError(f"delta {d} exceeds T/4")
        steps.append(m)
    t0 = time.perf_counter()
    scenario.measure = lambda rec: {f"{b}:{m}": translation_statistic(rec, m, b) for b in ("v", "w") for m in steps}
    res = run_ensemble(spec, scenario)
    logd = np.log(deltas)
    rng = np.random.default_rng(spec.master_seed)
    rows, gates, slopes = [], {}, {}
    for b in ("v", "w"):
        data = np.array([res.column(f"{b}:{m}") for m in steps])  # (deltas, paths)
        means = data.mean(axis=1)
        for d, mean, col in zip(deltas, means, data):
            rows.append({"variable": b, "delta": d, "mean": float(mean),
                         "stderr": float(col.std(ddof=1) / math.sqrt(col.size)) if col.size > 1 else 0.0})
        if np.any(means <= 0):
            slopes[b] = {"slope": math.nan, "ci_half_width": math.nan, "threshold": thresholds[b]}
            gates[f"slope_{b}"] = False
            continue
        slope = _ols_slope(logd, np.log(means))
        boot = []
        for _ in range(BOOTSTRAP_RESAMPLES):
            idx = rng.integers(0, data.shape[1], data.shape[1])
            bm = data[:, idx].mean(axis=1)
            if np.all(bm > 0):
                boot.append(_ols_slope(logd, np.log(bm)))
        lo, hi = np.percentile(boot, [2.5, 97.5])
        half = 0.5 * float(hi - lo)
        slopes[b] = {"slope": slope, "ci_low": float(lo), "ci_high": float(hi), "ci_half_width": half,
                     "threshold": thresholds[b]}
        gates[f"slope_{b}"] = slope >= thresholds[b] - half
    return EstimateReport("translation", rows, gates, spec.paths, spec.master_seed, res.seeds, slopes,
                          params={"deltas": deltas, "thresholds": thresholds},
                          runtime=time.perf_counter() - t0)


# stability -------------------------------------------------------------------

def pair_difference(rec_a: TrajectoryRecord, rec_b: TrajectoryRecord) -> float:
    """``sup ||dv||^2 + sum_j ||du_j||^2_{L2(Omega_T)} + sup ||dw||^2`` for two CRN paths."""
    if rec_a.increments is None or rec_b.increments is None or not rec_a.increments.equals(rec_b.increments):
        raise ValueError("paths do not share an identical increment stream")
    if rec_a.epsilon != rec_b.epsilon or not np.array_equal(rec_a.times, rec_b.times):
        raise ValueError("paths were run with different configurations")
    d = rec_a.states - rec_b.states
    n = rec_a.n
    s = math.sqrt(rec_a.epsilon)
    h = rec_a.times[1] - rec_a.times[0]
    sup_v = float(np.max(np.sum(d[:, :n] ** 2, axis=1)))
    sup_w = float(np.max(np.sum(d[:, 3 * n:] ** 2, axis=1)))
    u = float(h * np.sum(d[1:, n: 3 * n] ** 2)) / (s * s)
    return sup_v + u + sup_w


def _unit_direction(seed: int, n: int, perturb_w: bool) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(STREAM_INIT,))))
    x = rng.standard_normal(2 * n if perturb_w else n)
    x /= np.linalg.norm(x)
    return x[:n], (x[n:] if perturb_w else np.zeros(n))


def stability_suite(scenario: PathScenario, sizes: Sequence[float], spec: EnsembleSpec,
                    ratio_limit: float = 2.0, oracle_bound: float | None = None,
                    perturb_w: bool = True) -> EstimateReport:
    """Empirical L2 stability constant under common random numbers.

    Each pair shares one increment stream; the second member starts from
    ``(u_i0 + s d_u, u_e0, w0 + s d_w)`` with a random unit direction ``(d_u, d_w)``,
    so ``||dv0||^2 + ||dw0||^2 = s^2``. Gates: exact zero at s = 0, the ratio of
    largest to smallest constant over s > 0 at most ``ratio_limit``, and
    (optionally) every constant below ``oracle_bound``.
    """
    if spec.pairing != "common-increments":
        spec = EnsembleSpec(spec.paths, spec.master_seed, "common-increments", spec.functionals, spec.workers)
    t0 = time.perf_counter()
    cfg = scenario.config
    n = cfg.n
    pairs = pair_paths(spec)
    D = {s: [] for s in sizes}
    for pair in pairs:
        inc = pair_increments(pair, n, cfg.steps, cfg.dt)
        base_cfg = scenario.config_for(pair.seed_a)
        rec_a = solve_path(base_cfg, scenario.geometry, scenario.membrane, scenario.forcing, increments=inc)
        du, dw = _unit_direction(pair.seed_b, n, perturb_w)
        for s in sizes:
            pcfg = GalerkinConfig(n, cfg.epsilon, cfg.dt, cfg.T, cfg.stepper, base_cfg.u_i0 + s * du,
                                  base_cfg.u_e0, base_cfg.w0 + s * dw, cfg.stride, cfg.blowup)
            rec_b = solve_path(pcfg, scenario.geometry, scenario.membrane, scenario.forcing, increments=inc)
            D[s].append(pair_difference(rec_a, rec_b))
    rows, consts = [], []
    gates = {}
    for s in sizes:
        vals = np.array(D[s])
        mean = float(vals.mean())
        row = {"s": float(s), "difference": mean, "max_difference": float(vals.max())}
        if s == 0:
            gates["zero_at_s0"] = bool(np.all(vals == 0.0))
            row["constant"] = math.nan
        else:
            c = mean / (s * s)
            row["constant"] = c
            consts.append(c)
        rows.append(row)
    if consts:
        gates["constant_stable"] = max(consts) <= ratio_limit * min(consts)
        if oracle_bound is not None:
            gates["below_oracle"] = max(consts) <= oracle_bound
    return EstimateReport("stability", rows, gates, spec.paths, spec.master_seed,
                          [p.stream_seed for p in pairs],
                          params={"sizes": list(sizes), "ratio_limit": ratio_limit, "oracle_bound": oracle_bound},
                          runtime=time.perf_counter() - t0)


def linear_stability_bound(geometry: Geometry, epsilon: float) -> float:
    """``(1 + eps)(1 + 1 / (2 m lambda_1))``: energy decay plus Poincare for the linear difference system."""
    m, _ = geometry.conductivity.ellipticity
    lam1 = float(geometry.basis.eigenvalues[0])
    return (1.0 + epsilon) * (1.0 + 1.0 / (2.0 * m * lam1))


# monodomain ------------------------------------------------------------------

def monodomain_compare(scenario: PathScenario, epsilons: Sequence[float], seed: int) -> EstimateReport:
    """``||v_bi - v_mono||_{L2(Omega_T)}`` for each eps under common increments.

    The bidomain runs start from the split ``u_i0 = v0/(1+lambda)``,
    ``u_e0 = -lambda v0/(1+lambda)`` that annihilates ``K_i u_i + K_e u_e``.
    """
    lam = scenario.geometry.conductivity.proportionality()
    if lam is None:
        raise ValueError("monodomain reduction needs proportional conductivities M_i = lambda M_e")
    t0 = time.perf_counter()
    cfg = scenario.config
    geo = scenario.geometry
    v0, w0 = cfg.v0, cfg.w0
    inc = sample_increments(cfg.n, cfg.steps, cfg.dt, seed)
    K_M = geo.K_i / (1.0 + lam)
    times, c_mono, _ = solve_monodomain_path(v0, w0, K_M, geo, scenario.membrane, scenario.forcing, inc, cfg.stride)
    h = times[1] - times[0]
    rows, errs = [], []
    for eps in epsilons:
        bcfg = GalerkinConfig(cfg.n, float(eps), cfg.dt, cfg.T, cfg.stepper, v0 / (1 + lam),
                              -lam * v0 / (1 + lam), w0, cfg.stride, cfg.blowup)
        rec = solve_path(bcfg, geo, scenario.membrane, scenario.forcing, increments=inc)
        err = math.sqrt(h * float(np.sum((rec.c[1:] - c_mono[1:]) ** 2)))
        errs.append(err)
        rows.append({"epsilon": float(eps), "l2_difference": err})
    order = np.argsort(epsilons)[::-1]
    seq = [errs[i] for i in order]
    all_zero = all(e == 0.0 for e in seq)
    decreasing = all_zero or all(b < a for a, b in zip(seq[:-1], seq[1:]))
    return EstimateReport("monodomain", rows, {"strictly_decreasing": decreasing}, 1, seed, [seed],
                          params={"lambda": lam, "epsilons": [float(e) for e in epsilons]},
                          runtime=time.perf_counter() - t0)


# weak form -------------------------------------------------------------------

@dataclass
class WeakResidual:
    times: np.ndarray
    intra: np.ndarray
    extra: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.intra)), np.max(np.abs(self.extra))))


def weak_residual(record: TrajectoryRecord, geometry: Geometry, membrane: MembraneModel,
                  forcing: Forcing, ell: int) -> WeakResidual:
    """Residuals of the two weak identities tested with ``e_ell`` (1-based).

    ``(v + eps u_i)(t) - (v + eps u_i)(0) + int_0^t (K_i u_i + <I>)_ell - int_0^t (Gamma dW)_ell`` and
    ``(v - eps u_e)(t) - (v - eps u_e)(0) - int_0^t (K_e u_e - <I>)_ell - int_0^t (Gamma dW)_ell``,
    with trapezoid time integrals and left-point Ito sums over the recorded increments.
    """
    if record.increments is None:
        raise ValueError("the trajectory has no increment record")
    n = record.n
    if not 1 <= ell <= n:
        raise ValueError(f"test function index {ell} outside 1..{n}")
    if record.stride != 1:
        raise ValueError("weak residual needs every step (stride 1)")
    l = ell - 1
    problem = BidomainGalerkin.from_geometry(geometry, membrane, forcing, record.epsilon)
    s = math.sqrt(record.epsilon)
    c, ci, ce, a = record.c, record.ci_s / s, record.ce_s / s, record.a
    I_l = np.array([problem.membrane_projections(c[k], a[k])[0][l] for k in range(len(c))])
    Ki_l = ci @ geometry.K_i[l]
    Ke_l = ce @ geometry.K_e[l]
    h = np.diff(record.times)

    def cumtrap(y):
        return np.concatenate([[0.0], np.cumsum(0.5 * h * (y[1:] + y[:-1]))])

    inc = record.increments
    ito = np.zeros(len(c))
    if not forcing.eta.is_zero:
        v_q = c[:-1] @ geometry.basis.values
        incr = np.array([forcing.eta.apply(geometry.basis, v_q[k], inc.dW_v[k])[l] for k in range(len(c) - 1)])
        ito[1:] = np.cumsum(incr)
    eps = record.epsilon
    lhs_i = (c[:, l] + eps * ci[:, l]) - (c[0, l] + eps * ci[0, l])
    lhs_e = (c[:, l] - eps * ce[:, l]) - (c[0, l] - eps * ce[0, l])
    r_i = lhs_i + cumtrap(Ki_l + I_l) - ito
    r_e = lhs_e - cumtrap(Ke_l - I_l) - ito
    return WeakResidual(record.times.copy(), r_i, r_e)


def weak_residual_richardson(scenario: PathScenario, ell: int = 1, seed: int | None = None) -> tuple[float, float, float]:
    """Max residual at dt and dt/2 (same Brownian path) and their ratio."""
    cfg = scenario.config
    out = []
    fine = None
    if not scenario.forcing.is_zero:
        if seed is None:
            raise ValueError("stochastic Richardson test needs a seed")
        fine = sample_increments(cfg.n, 2 * cfg.steps, cfg.dt / 2, seed)
    for factor in (1, 2):
        c2 = GalerkinConfig(cfg.n, cfg.epsilon, cfg.dt / factor, cfg.T, cfg.stepper, cfg.u_i0, cfg.u_e0,
                            cfg.w0, 1, cfg.blowup)
        inc = None if fine is None else (fine if factor == 2 else fine.coarsened(2))
        rec = solve_path(c2, scenario.geometry, scenario.membrane, scenario.forcing, increments=inc)
        out.append(weak_residual(rec, scenario.geometry, scenario.membrane, scenario.forcing, ell).max_abs)
    return out[0], out[1], (out[1] / out[0] if out[0] > 0 else 0.0)
