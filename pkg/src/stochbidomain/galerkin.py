"""Galerkin SDE system for the regularized stochastic bidomain model.

The state is kept in scaled variables ``C = (c, sqrt(eps) c_i, sqrt(eps) c_e, a)``
so nothing blows up as eps -> 0. With

    A_i = -K_i c_i - <I>,   A_e = K_e c_e - <I>,   A_H = <H>

the drift blocks are

    F_ie = (A_i + A_e) / (2 + eps)
    F_i  = ((1 + eps) A_i - A_e) / (sqrt(eps) (2 + eps))
    F_e  = (A_i - (1 + eps) A_e) / (sqrt(eps) (2 + eps))
    F_H  = A_H

and the noise blocks are ``(2 G, sqrt(eps) G, -sqrt(eps) G, zeta)`` with
``G = Gamma / (2 + eps)``. Since ``(F_i - F_e) / sqrt(eps) = F_ie``, the
v-block and the difference of the potential blocks move together, which both
steppers preserve up to round-off.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .geometry import BasisSet, ConductivityField, Domain, assemble_stiffness, build_basis
from .membrane import MembraneModel, gating_rhs, ion_current
from .noise import Forcing, NoiseModel, WienerIncrements, sample_increments, zero_increments

STEPPERS = ("euler-maruyama", "semi-implicit")


class BlowUpError(RuntimeError):
    """The state norm crossed the configured threshold."""

    def __init__(self, step: int, t: float, norm: float, energy: float):
        self.step, self.t, self.norm, self.energy = step, t, norm, energy
        super().__init__(f"blow-up at step {step} (t={t:.6g}): |C|={norm:.3e}, energy={energy:.3e}")


class LinearSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class Geometry:
    """Basis plus the two assembled stiffness matrices."""

    basis: BasisSet
    conductivity: ConductivityField
    K_i: np.ndarray = field(init=False, repr=False)
    K_e: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "K_i", assemble_stiffness(self.basis, self.conductivity, "intra"))
        object.__setattr__(self, "K_e", assemble_stiffness(self.basis, self.conductivity, "extra"))

    @classmethod
    def build(cls, domain: Domain, n: int, conductivity: ConductivityField, quad_order=None) -> "Geometry":
        return cls(build_basis(domain, n, quad_order), conductivity)

    @property
    def n(self) -> int:
        return self.basis.n


@dataclass
class GalerkinConfig:
    n: int
    epsilon: float | None = None
    dt: float = 1e-3
    T: float = 1.0
    stepper: str = "semi-implicit"
    u_i0: np.ndarray | None = None
    u_e0: np.ndarray | None = None
    w0: np.ndarray | None = None
    stride: int = 1
    blowup: float = 1e6

    def __post_init__(self):
        n = self.n
        if n < 1:
            raise ValueError("n must be >= 1")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.T >= self.dt:
            raise ValueError(f"need T >= dt, got T={self.T}, dt={self.dt}")
        if self.stepper not in STEPPERS:
            raise ValueError(f"stepper must be one of {STEPPERS}, got {self.stepper!r}")
        steps = round(self.T / self.dt)
        if abs(steps * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError("T must be an integer multiple of dt")
        if self.stride < 1 or steps % self.stride:
            raise ValueError(f"stride {self.stride} must divide the step count {steps}")
        for name in ("u_i0", "u_e0", "w0"):
            val = getattr(self, name)
            val = np.zeros(n) if val is None else np.array(val, dtype=float)
            if val.shape != (n,):
                raise ValueError(f"{name} must have length {n}, got shape {val.shape}")
            setattr(self, name, val)

    @property
    def eps(self) -> float:
        return 1.0 / self.n if self.epsilon is None else float(self.epsilon)

    @property
    def steps(self) -> int:
        return round(self.T / self.dt)

    @property
    def v0(self) -> np.ndarray:
        return self.u_i0 - self.u_e0

    def initial_vector(self) -> np.ndarray:
        s = math.sqrt(self.eps)
        return np.concatenate([self.v0, s * self.u_i0, s * self.u_e0, self.w0])


@dataclass
class GalerkinState:
    c: np.ndarray
    ci_s: np.ndarray
    ce_s: np.ndarray
    a: np.ndarray
    t: float = 0.0

    @classmethod
    def from_vector(cls, C: np.ndarray, t: float = 0.0) -> "GalerkinState":
        C = np.asarray(C, dtype=float)
        if C.ndim != 1 or C.size % 4:
            raise ValueError(f"scaled state must be a flat vector of length 4n, got shape {C.shape}")
        c, ci, ce, a = np.split(C, 4)
        return cls(c, ci, ce, a, t)

    @classmethod
    def from_potentials(cls, u_i, u_e, w, epsilon: float, t: float = 0.0) -> "GalerkinState":
        u_i, u_e, w = (np.asarray(x, dtype=float) for x in (u_i, u_e, w))
        s = math.sqrt(epsilon)
        return cls(u_i - u_e, s * u_i, s * u_e, w, t)

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.c, self.ci_s, self.ce_s, self.a])

    def consistency_defect(self, epsilon: float) -> float:
        return float(np.max(np.abs(self.c - (self.ci_s - self.ce_s) / math.sqrt(epsilon))))


def _as_vector(state) -> np.ndarray:
    return state.vector if isinstance(state, GalerkinState) else np.asarray(state, dtype=float)


class BidomainGalerkin:
    """Assembled drift, diffusion and stepping operators for one (basis, eps) pair."""

    def __init__(self, basis: BasisSet, K_i: np.ndarray, K_e: np.ndarray, membrane: MembraneModel,
                 forcing: Forcing | None = None, epsilon: float | None = None):
        n = basis.n
        K_i = np.asarray(K_i, dtype=float)
        K_e = np.asarray(K_e, dtype=float)
        if K_i.shape != (n, n) or K_e.shape != (n, n):
            raise ValueError(f"stiffness matrices must be {n}x{n}, got {K_i.shape} and {K_e.shape}")
        eps = 1.0 / n if epsilon is None else float(epsilon)
        if not eps > 0:
            raise ValueError(f"epsilon must be positive, got {eps}")
        self.basis, self.K_i, self.K_e = basis, K_i, K_e
        self.membrane = membrane
        self.forcing = Forcing() if forcing is None else forcing
        self.eps = eps
        self.sqe = math.sqrt(eps)
        self.n = n
        self._lu = None
        self._lu_dt = None

    @classmethod
    def from_geometry(cls, geometry: Geometry, membrane: MembraneModel, forcing: Forcing | None = None,
                      epsilon: float | None = None) -> "BidomainGalerkin":
        return cls(geometry.basis, geometry.K_i, geometry.K_e, membrane, forcing, epsilon)

    def split(self, C: np.ndarray):
        C = np.asarray(C, dtype=float)
        if C.shape != (4 * self.n,):
            raise ValueError(f"expected a scaled state of length {4 * self.n}, got shape {C.shape}")
        return C[: self.n], C[self.n: 2 * self.n], C[2 * self.n: 3 * self.n], C[3 * self.n:]

    # drift -----------------------------------------------------------------

    def linear_operator(self) -> np.ndarray:
        """Matrix L with ``F_lin(C) = L C`` (the stiffness part of the drift)."""
        n, e, s = self.n, self.eps, self.sqe
        d = 2.0 + e
        Z = np.zeros((n, n))
        Ki, Ke = self.K_i, self.K_e
        return np.block([
            [Z, -Ki / (s * d), Ke / (s * d), Z],
            [Z, -(1 + e) * Ki / (e * d), -Ke / (e * d), Z],
            [Z, -Ki / (e * d), -(1 + e) * Ke / (e * d), Z],
            [Z, Z, Z, Z],
        ])

    def membrane_projections(self, c: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(<I(v, w), e_l>, <H(v, w), e_l>)`` by quadrature."""
        if not self.membrane.enabled:
            return np.zeros(self.n), np.zeros(self.n)
        b = self.basis
        v, w = b.field(c), b.field(a)
        proj = b.inner(np.stack([ion_current(self.membrane, v, w), gating_rhs(self.membrane, v, w)]))
        return proj[0], proj[1]

    def drift_nonlinear(self, C: np.ndarray) -> np.ndarray:
        c, _, _, a = self.split(C)
        I_p, H_p = self.membrane_projections(c, a)
        g = I_p / (2.0 + self.eps)
        return np.concatenate([-2.0 * g, -self.sqe * g, self.sqe * g, H_p])

    def drift(self, C: np.ndarray) -> np.ndarray:
        c, ci_s, ce_s, a = self.split(C)
        e, s = self.eps, self.sqe
        I_p, H_p = self.membrane_projections(c, a)
        A_i = -(self.K_i @ ci_s) / s - I_p
        A_e = (self.K_e @ ce_s) / s - I_p
        d = 2.0 + e
        return np.concatenate([(A_i + A_e) / d, ((1 + e) * A_i - A_e) / (s * d),
                               (A_i - (1 + e) * A_e) / (s * d), H_p])

    # diffusion -------------------------------------------------------------

    def diffusion(self, C: np.ndarray) -> np.ndarray:
        """Diffusion matrix of shape ``(4n, 2n)``; columns are modes of W^v then W^w."""
        c, _, _, _ = self.split(C)
        n = self.n
        G = np.zeros((4 * n, 2 * n))
        eta, sigma = self.forcing.eta, self.forcing.sigma
        if not eta.is_zero:
            g = eta.coupling(self.basis, c) / (2.0 + self.eps)
            G[:n, :n] = 2.0 * g
            G[n: 2 * n, :n] = self.sqe * g
            G[2 * n: 3 * n, :n] = -self.sqe * g
        if not sigma.is_zero:
            G[3 * n:, n:] = sigma.coupling(self.basis, c)
        return G

    def noise_term(self, C: np.ndarray, dW_v: np.ndarray, dW_w: np.ndarray) -> np.ndarray:
        """``G(C) dW`` without forming G."""
        n = self.n
        out = np.zeros(4 * n)
        eta, sigma = self.forcing.eta, self.forcing.sigma
        if eta.is_zero and sigma.is_zero:
            return out
        v = self.basis.field(C[:n])
        if not eta.is_zero:
            g = eta.apply(self.basis, v, dW_v) / (2.0 + self.eps)
            out[:n] = 2.0 * g
            out[n: 2 * n] = self.sqe * g
            out[2 * n: 3 * n] = -self.sqe * g
        if not sigma.is_zero:
            out[3 * n:] = sigma.apply(self.basis, v, dW_w)
        return out

    # stepping --------------------------------------------------------------

    def factor(self, dt: float):
        """LU factors of ``I - dt L`` (cached per dt)."""
        if self._lu is not None and self._lu_dt == dt:
            return self._lu
        A = np.eye(4 * self.n) - dt * self.linear_operator()
        with warnings.catch_warnings():
            warnings.simplefilter("error", LinAlgWarning)
            try:
                lu = lu_factor(A, check_finite=True)
            except (LinAlgWarning, ValueError, np.linalg.LinAlgError) as exc:
                raise LinearSolveError(f"factorization of I - dt L failed (cond={np.linalg.cond(A):.3e}): {exc}") from exc
        if np.any(np.diag(lu[0]) == 0):
            raise LinearSolveError(f"I - dt L is singular (cond={np.linalg.cond(A):.3e})")
        self._lu, self._lu_dt = lu, dt
        return lu

    def step(self, C: np.ndarray, dt: float, dW_v: np.ndarray, dW_w: np.ndarray, stepper: str) -> np.ndarray:
        if stepper == "euler-maruyama":
            return C + dt * self.drift(C) + self.noise_term(C, dW_v, dW_w)
        if stepper == "semi-implicit":
            rhs = C + dt * self.drift_nonlinear(C) + self.noise_term(C, dW_v, dW_w)
            return lu_solve(self.factor(dt), rhs, check_finite=False)
        raise ValueError(f"unknown stepper {stepper!r}")

    # certified constants ---------------------------------------------------

    def coercivity_constant(self) -> float:
        """K with ``2 F(C).C + |G(C)|^2 <= K (1 + |C|^2)`` for all C."""
        k = self.membrane.constants
        A_eta, B_eta = self.forcing.eta.growth_constants(self.basis)
        A_sig, B_sig = self.forcing.sigma.growth_constants(self.basis)
        f = 2.0 / (2.0 + self.eps)
        if not self.membrane.enabled:
            return max(f * B_eta + B_sig, f * A_eta + A_sig)
        return max(2 * k.C2 + f * B_eta + B_sig,
                   2 * k.C3 * self.basis.domain.measure + f * A_eta + A_sig)

    def monotonicity_constant(self) -> float:
        """K_r with ``2 dF.dC + |dG|^2 <= K_r |dC|^2`` (global, so valid for every radius r)."""
        f = 2.0 / (2.0 + self.eps)
        noise = f * self.forcing.eta.lipschitz_sq(self.basis) + self.forcing.sigma.lipschitz_sq(self.basis)
        pair = self.membrane.constants.pair_lipschitz if self.membrane.enabled else 0.0
        return 2.0 * pair + noise

    # functionals -----------------------------------------------------------

    def unscaled(self, C: np.ndarray):
        c, ci_s, ce_s, a = self.split(C)
        return c, ci_s / self.sqe, ce_s / self.sqe, a


def assemble_drift(state, K_i, K_e, membrane: MembraneModel, basis: BasisSet, epsilon: float) -> np.ndarray:
    """Drift F(C) of length 4n."""
    C = _as_vector(state)
    if C.shape != (4 * basis.n,):
        raise ValueError(f"state has length {C.size}, expected {4 * basis.n}")
    return BidomainGalerkin(basis, K_i, K_e, membrane, None, epsilon).drift(C)


def assemble_diffusion(state, noise: Forcing | NoiseModel, basis: BasisSet, epsilon: float) -> np.ndarray:
    """Diffusion blocks ``(2G, sqrt(eps) G, -sqrt(eps) G, zeta)`` as a ``(4n, 2n)`` matrix.

    A bare NoiseModel is taken as the potential noise eta with no gating noise.
    """
    C = _as_vector(state)
    n = basis.n
    if C.shape != (4 * n,):
        raise ValueError(f"state has length {C.size}, expected {4 * n}")
    forcing = noise if isinstance(noise, Forcing) else Forcing(eta=noise)
    Z = np.zeros((n, n))
    return BidomainGalerkin(basis, Z, Z, MembraneModel().off(), forcing, epsilon).diffusion(C)


def em_step(state, F: np.ndarray, G: np.ndarray, dW: np.ndarray, dt: float) -> np.ndarray:
    """One Euler-Maruyama update ``C + F dt + G dW``."""
    C = _as_vector(state)
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    dW = np.asarray(dW, dtype=float)
    if F.shape != C.shape or G.shape != (C.size, dW.size):
        raise ValueError(f"inconsistent shapes: C {C.shape}, F {F.shape}, G {G.shape}, dW {dW.shape}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    return C + dt * F + G @ dW


def semi_implicit_step(state, F_nonlinear: np.ndarray, noise_increment: np.ndarray, lu) -> np.ndarray:
    """Solve ``(I - dt L) C' = C + dt F_nl(C) + G dW`` given ``dt F_nl`` and the LU of ``I - dt L``."""
    C = _as_vector(state)
    return lu_solve(lu, C + F_nonlinear + noise_increment, check_finite=False)


@dataclass(eq=False)
class TrajectoryRecord:
    """Snapshots of the scaled state plus the increments that produced them."""

    times: np.ndarray
    states: np.ndarray
    increments: WienerIncrements | None
    epsilon: float
    dt: float
    stride: int
    stepper: str
    seed: int | None = None
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.states.shape[1] // 4

    @property
    def c(self) -> np.ndarray:
        return self.states[:, : self.n]

    @property
    def ci_s(self) -> np.ndarray:
        return self.states[:, self.n: 2 * self.n]

    @property
    def ce_s(self) -> np.ndarray:
        return self.states[:, 2 * self.n: 3 * self.n]

    @property
    def a(self) -> np.ndarray:
        return self.states[:, 3 * self.n:]

    @property
    def final(self) -> GalerkinState:
        return GalerkinState.from_vector(self.states[-1], float(self.times[-1]))

    def consistency_defect(self) -> np.ndarray:
        """``max_l |c - (ci_s - ce_s)/sqrt(eps)|`` per snapshot."""
        return np.max(np.abs(self.c - (self.ci_s - self.ce_s) / math.sqrt(self.epsilon)), axis=1)

    def equals(self, other: "TrajectoryRecord") -> bool:
        return np.array_equal(self.times, other.times) and np.array_equal(self.states, other.states)

    def functionals(self, geometry: Geometry, membrane: MembraneModel | None = None) -> dict:
        """Per-snapshot energy functionals (cached).

        Keys: ``v_sq``, ``w_sq``, ``eps_ui_sq``, ``eps_ue_sq`` (squared L2 norms),
        ``grad_ui_sq``, ``grad_ue_sq`` (``||grad u_j||^2``), ``diss_i``, ``diss_e``
        (``u_j^T K_j u_j``), ``v4`` (``int v^4``), ``energy`` (``|C|^2``) and, if a
        membrane is given, ``source`` (``int (w H - v I)``).
        """
        key = ("functionals", id(geometry), None if membrane is None else membrane)
        if key in self.cache:
            return self.cache[key]
        b = geometry.basis
        s = math.sqrt(self.epsilon)
        ci, ce = self.ci_s / s, self.ce_s / s
        lam = b.eigenvalues
        v_q = self.c @ b.values
        out = {
            "v_sq": np.sum(self.c**2, axis=1),
            "w_sq": np.sum(self.a**2, axis=1),
            "eps_ui_sq": np.sum(self.ci_s**2, axis=1),
            "eps_ue_sq": np.sum(self.ce_s**2, axis=1),
            "grad_ui_sq": ci**2 @ lam,
            "grad_ue_sq": ce**2 @ lam,
            "diss_i": np.einsum("tl,lm,tm->t", ci, geometry.K_i, ci),
            "diss_e": np.einsum("tl,lm,tm->t", ce, geometry.K_e, ce),
            "v4": b.integrate(v_q**4),
            "energy": np.sum(self.states**2, axis=1),
        }
        if membrane is not None:
            w_q = self.a @ b.values
            out["source"] = b.integrate(w_q * gating_rhs(membrane, v_q, w_q) - v_q * ion_current(membrane, v_q, w_q))
        self.cache[key] = out
        return out


def solve_path(config: GalerkinConfig, geometry: Geometry, membrane: MembraneModel,
               noise: Forcing | None = None, seed: int | None = None,
               increments: WienerIncrements | None = None) -> TrajectoryRecord:
    """Integrate one path on [0, T].

    Increments are drawn from ``seed`` unless an explicit (replayed) set is
    passed; with zero forcing no seed is needed.
    """
    n = config.n
    if geometry.n != n:
        raise ValueError(f"geometry has {geometry.n} modes but config.n = {n}")
    forcing = Forcing() if noise is None else noise
    steps, dt = config.steps, config.dt
    if increments is None:
        if forcing.is_zero:
            increments = zero_increments(n, steps, dt) if seed is None else sample_increments(n, steps, dt, seed)
        elif seed is None:
            raise ValueError("a seed or an increment record is required for a stochastic run")
        else:
            increments = sample_increments(n, steps, dt, seed)
    else:
        if not math.isclose(increments.dt, dt, rel_tol=1e-12):
            raise ValueError(f"increment dt {increments.dt} does not match config dt {dt}")
        if increments.steps != steps:
            raise ValueError(f"increment record has {increments.steps} steps, config needs {steps}")
        if increments.n < n:
            raise ValueError(f"increment record has {increments.n} modes, config needs {n}")
        if increments.n > n:
            increments = increments.truncated(n)

    problem = BidomainGalerkin.from_geometry(geometry, membrane, forcing, config.eps)
    if config.stepper == "semi-implicit":
        problem.factor(dt)
    stride = config.stride
    states = np.empty((steps // stride + 1, 4 * n))
    C = config.initial_vector()
    states[0] = C
    limit_sq = config.blowup**2
    dv, dw = increments.dW_v, increments.dW_w
    for k in range(steps):
        C = problem.step(C, dt, dv[k], dw[k], config.stepper)
        nsq = float(C @ C)
        if not (nsq <= limit_sq):
            raise BlowUpError(k + 1, (k + 1) * dt, math.sqrt(nsq) if math.isfinite(nsq) else math.inf, nsq)
        if (k + 1) % stride == 0:
            states[(k + 1) // stride] = C
    times = np.arange(states.shape[0]) * (stride * dt)
    return TrajectoryRecord(times, states, increments, config.eps, dt, stride, config.stepper, seed)


@dataclass
class MonotonicityReport:
    I_M: float
    I_IH: float
    diffusion_quotient: float
    total: float
    bound: float

    @property
    def margin(self) -> float:
        return self.bound - self.total


def check_monotonicity(C1, C2, problem: BidomainGalerkin) -> MonotonicityReport:
    """Split ``2 (F(C1) - F(C2)).(C1 - C2) + |G(C1) - G(C2)|^2`` into its pieces.

    ``I_M = -sum_j dU_j^T K_j dU_j`` (stiffness part, always <= 0) and
    ``I_IH = int (dH dw - dI dv)`` (membrane pairing); ``2 I_M + 2 I_IH`` is the
    drift pairing. ``bound = K_r |dC|^2``.
    """
    C1, C2 = _as_vector(C1), _as_vector(C2)
    d = C1 - C2
    dsq = float(d @ d)
    _, dci, dce, _ = problem.unscaled(d)
    I_M = -float(dci @ problem.K_i @ dci + dce @ problem.K_e @ dce)
    c1, _, _, a1 = problem.split(C1)
    c2, _, _, a2 = problem.split(C2)
    I1p, H1p = problem.membrane_projections(c1, a1)
    I2p, H2p = problem.membrane_projections(c2, a2)
    dc, _, _, da = problem.split(d)
    I_IH = float((H1p - H2p) @ da - (I1p - I2p) @ dc)
    dG = problem.diffusion(C1) - problem.diffusion(C2)
    gsq = float(np.sum(dG**2))
    total = 2.0 * float((problem.drift(C1) - problem.drift(C2)) @ d) + gsq
    return MonotonicityReport(I_M, I_IH, gsq / dsq if dsq > 0 else 0.0, total,
                              problem.monotonicity_constant() * dsq)


def check_coercivity(C, problem: BidomainGalerkin) -> float:
    """Margin ``K (1 + |C|^2) - (2 F(C).C + |G(C)|^2)``."""
    C = _as_vector(C)
    val = 2.0 * float(problem.drift(C) @ C) + float(np.sum(problem.diffusion(C) ** 2))
    return problem.coercivity_constant() * (1.0 + float(C @ C)) - val


def energy_balance(record: TrajectoryRecord, geometry: Geometry, membrane: MembraneModel) -> np.ndarray:
    """Deterministic energy identity defect per snapshot.

    ``|C(t)|^2 + 2 int_0^t sum_j u_j^T K_j u_j - 2 int_0^t int (w H - v I) - |C(0)|^2``,
    time integrals by the trapezoid rule over snapshots. O(dt) for noise-free runs.
    """
    f = record.functionals(geometry, membrane)
    rate = 2.0 * (f["diss_i"] + f["diss_e"]) - 2.0 * f["source"]
    h = np.diff(record.times)
    integral = np.concatenate([[0.0], np.cumsum(0.5 * h * (rate[1:] + rate[:-1]))])
    return f["energy"] + integral - f["energy"][0]


class MonodomainGalerkin:
    """Galerkin system of the reduced model ``dv = (-K_M c - <I>) dt + Gamma dW^v`` plus the gating SDE."""

    def __init__(self, basis: BasisSet, K_M: np.ndarray, membrane: MembraneModel, forcing: Forcing | None = None):
        self.basis, self.K_M, self.membrane = basis, np.asarray(K_M, dtype=float), membrane
        self.forcing = Forcing() if forcing is None else forcing
        self.n = basis.n
        self._lu = None
        self._lu_dt = None
        self._proj = BidomainGalerkin(basis, self.K_M, self.K_M, membrane, self.forcing, 1.0)

    def step(self, c: np.ndarray, a: np.ndarray, dt: float, dW_v: np.ndarray, dW_w: np.ndarray):
        if self._lu_dt != dt:
            self._lu, self._lu_dt = lu_factor(np.eye(self.n) + dt * self.K_M), dt
        I_p, H_p = self._proj.membrane_projections(c, a)
        eta, sigma = self.forcing.eta, self.forcing.sigma
        v = self.basis.field(c) if not self.forcing.is_zero else None
        rhs = c - dt * I_p
        a_new = a + dt * H_p
        if not eta.is_zero:
            rhs = rhs + eta.apply(self.basis, v, dW_v)
        if not sigma.is_zero:
            a_new = a_new + sigma.apply(self.basis, v, dW_w)
        return lu_solve(self._lu, rhs, check_finite=False), a_new


def solve_monodomain_path(v0: np.ndarray, w0: np.ndarray, K_M: np.ndarray, geometry: Geometry,
                          membrane: MembraneModel, forcing: Forcing, increments: WienerIncrements,
                          stride: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Semi-implicit path of the reduced model; returns ``(times, c, a)`` snapshots."""
    system = MonodomainGalerkin(geometry.basis, K_M, membrane, forcing)
    n, steps, dt = geometry.n, increments.steps, increments.dt
    if increments.n < n:
        raise ValueError(f"increment record has {increments.n} modes, need {n}")
    c, a = np.array(v0, dtype=float), np.array(w0, dtype=float)
    cs, as_ = [c.copy()], [a.copy()]
    for k in range(steps):
        c, a = system.step(c, a, dt, increments.dW_v[k, :n], increments.dW_w[k, :n])
        if (k + 1) % stride == 0:
            cs.append(c.copy())
            as_.append(a.copy())
    times = np.arange(len(cs)) * (stride * dt)
    return times, np.array(cs), np.array(as_)
