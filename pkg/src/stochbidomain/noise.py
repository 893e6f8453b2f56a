"""Truncated cylindrical Wiener processes and noise amplitudes.

Amplitudes follow ``beta_k(v) = gamma_k (b0 + b1 v) p_k(x)`` with
``gamma_k = s0 / k``. With ``profile="uniform"`` the spatial factor is
``p_k = 1`` and beta_k depends on x only through v(x); ``profile="modal"``
uses ``p_k = sqrt(|Omega|) e_k`` so mode k of the noise drives basis
function k.

Wiener increments are drawn per (stream, mode) from numpy ``SeedSequence``
children: ``SeedSequence(seed, spawn_key=(stream, k))`` with stream 0 for
W^v and stream 1 for W^w. Mode k therefore receives the same Brownian path
at every truncation level n >= k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import BasisSet

STREAM_V = 0
STREAM_W = 1
STREAM_INIT = 2


@dataclass(frozen=True)
class NoiseModel:
    """Amplitude family ``beta_k(v) = (s0 / k) (b0 + b1 v) p_k``.

    ``b1 = 0`` gives additive noise, ``b0 = 0`` conductance-type
    multiplicative noise.
    """

    strength: float = 0.0
    b0: float = 1.0
    b1: float = 0.0
    profile: str = "uniform"

    def __post_init__(self):
        if self.profile not in ("uniform", "modal"):
            raise ValueError(f"unknown noise profile {self.profile!r}")
        if self.strength < 0:
            raise ValueError("noise strength must be nonnegative")

    @property
    def kind(self) -> str:
        return "additive" if self.b1 == 0.0 else "multiplicative-affine"

    @property
    def is_zero(self) -> bool:
        return self.strength == 0.0 or (self.b0 == 0.0 and self.b1 == 0.0)

    def gamma(self, n: int) -> np.ndarray:
        return self.strength / np.arange(1, n + 1)

    def profile_sup_sq(self, basis: BasisSet | None = None) -> float:
        """Bound on ``sup_x |p_k(x)|^2`` over all k."""
        if self.profile == "uniform":
            return 1.0
        # |e_k| <= prod_axes sqrt(2 / L_a), so |Omega| |e_k|^2 <= 2^dim
        dim = 1 if basis is None else basis.domain.dim
        return float(2**dim)

    def c_beta(self, basis: BasisSet | None = None) -> float:
        """Constant of the growth and Lipschitz conditions (full series over k)."""
        sum_gamma_sq = self.strength**2 * math.pi**2 / 6.0
        return 2.0 * (self.b0**2 + self.b1**2) * sum_gamma_sq * self.profile_sup_sq(basis)

    def growth_constants(self, basis: BasisSet) -> tuple[float, float]:
        """``(A, B)`` with ``sum_k ||beta_k(v)||^2 <= A + B ||v||^2`` for every v."""
        s = self.strength**2 * math.pi**2 / 6.0 * self.profile_sup_sq(basis)
        return 2.0 * self.b0**2 * s * basis.domain.measure, 2.0 * self.b1**2 * s

    def lipschitz_sq(self, basis: BasisSet) -> float:
        """``L`` with ``sum_k ||beta_k(v1) - beta_k(v2)||^2 <= L ||v1 - v2||^2``."""
        return self.b1**2 * self.strength**2 * math.pi**2 / 6.0 * self.profile_sup_sq(basis)

    def pointwise(self, v, n: int) -> np.ndarray:
        """``beta_k(v)`` for k = 1..n without the spatial factor, shape ``v.shape + (n,)``."""
        v = np.asarray(v, dtype=float)
        return (self.b0 + self.b1 * v)[..., None] * self.gamma(n)

    def coupling(self, basis: BasisSet, v_coeffs: np.ndarray) -> np.ndarray:
        """``Gamma[l, k] = (beta_k(v), e_l)`` by quadrature, shape ``(n, n)``."""
        n = basis.n
        gam = self.gamma(n)
        f = self.b0 + self.b1 * basis.field(v_coeffs)
        if self.profile == "uniform":
            return np.outer(basis.inner(f), gam)
        scale = math.sqrt(basis.domain.measure)
        return ((basis.values * (basis.weights * f)) @ basis.values.T) * (scale * gam)

    def apply(self, basis: BasisSet, v_field: np.ndarray, dW: np.ndarray) -> np.ndarray:
        """``Gamma(v) @ dW`` without forming Gamma (``v_field`` at quadrature points)."""
        gam = self.gamma(basis.n)
        f = self.b0 + self.b1 * v_field
        if self.profile == "uniform":
            return basis.inner(f) * float(gam @ dW)
        scale = math.sqrt(basis.domain.measure)
        return basis.inner(f * (scale * (gam * dW) @ basis.values))


def hs_norm_sq(noise: NoiseModel, v_coeffs: np.ndarray, basis: BasisSet, truncation: int | None = None) -> float:
    """``sum_{k <= n} ||beta_k(v)||^2_{L2}`` by quadrature."""
    v_coeffs = np.asarray(v_coeffs, dtype=float)
    if v_coeffs.shape != (basis.n,):
        raise ValueError(f"expected {basis.n} coefficients, got shape {v_coeffs.shape}")
    n = basis.n if truncation is None else int(truncation)
    if noise.profile == "modal" and n > basis.n:
        raise ValueError("modal noise truncation cannot exceed the basis size")
    f = noise.b0 + noise.b1 * basis.field(v_coeffs)
    gam_sq = noise.gamma(n) ** 2
    if noise.profile == "uniform":
        return float(gam_sq.sum() * basis.integrate(f**2))
    prof = basis.domain.measure * basis.values[:n] ** 2
    return float(gam_sq @ basis.integrate(prof * f**2))


def u0_norm(series_coeffs, b=None) -> float:
    """Norm ``(sum a_k^2 b_k^2)^(1/2)`` of the auxiliary space U0 (default ``b_k = 1/k``)."""
    a = np.asarray(series_coeffs, dtype=float)
    if b is None:
        b = 1.0 / np.arange(1, len(a) + 1)
    b = np.asarray(b, dtype=float)
    if np.any(b == 0):
        raise ValueError("U0 weights must be nonzero")
    return float(np.sqrt(np.sum(a**2 * b**2)))


@dataclass(frozen=True, eq=False)
class WienerIncrements:
    """Increments of W^v and W^w, each of shape ``(steps, n)``."""

    dt: float
    dW_v: np.ndarray
    dW_w: np.ndarray
    seed: int | None = None

    @property
    def steps(self) -> int:
        return self.dW_v.shape[0]

    @property
    def n(self) -> int:
        return self.dW_v.shape[1]

    def truncated(self, n: int) -> "WienerIncrements":
        return WienerIncrements(self.dt, self.dW_v[:, :n], self.dW_w[:, :n], self.seed)

    def coarsened(self, factor: int) -> "WienerIncrements":
        """Sum consecutive blocks of ``factor`` increments (same Brownian path, larger dt)."""
        steps = self.steps // factor
        sl = slice(0, steps * factor)
        dv = self.dW_v[sl].reshape(steps, factor, self.n).sum(axis=1)
        dw = self.dW_w[sl].reshape(steps, factor, self.n).sum(axis=1)
        return WienerIncrements(self.dt * factor, dv, dw, self.seed)

    def equals(self, other: "WienerIncrements") -> bool:
        return (self.dt == other.dt and np.array_equal(self.dW_v, other.dW_v)
                and np.array_equal(self.dW_w, other.dW_w))


def _mode_stream(seed: int, stream: int, k: int, steps: int) -> np.ndarray:
    ss = np.random.SeedSequence(int(seed), spawn_key=(stream, k))
    return np.random.Generator(np.random.PCG64(ss)).standard_normal(steps)


def sample_increments(n: int, steps: int, dt: float, seed: int) -> WienerIncrements:
    """Independent ``N(0, dt)`` increments for modes 1..n of W^v and W^w."""
    if n < 1 or steps < 1:
        raise ValueError("need n >= 1 and steps >= 1")
    if not dt > 0:
        raise ValueError("dt must be positive")
    sd = math.sqrt(dt)
    dv = np.empty((steps, n))
    dw = np.empty((steps, n))
    for k in range(n):
        dv[:, k] = sd * _mode_stream(seed, STREAM_V, k, steps)
        dw[:, k] = sd * _mode_stream(seed, STREAM_W, k, steps)
    return WienerIncrements(float(dt), dv, dw, int(seed))


def zero_increments(n: int, steps: int, dt: float) -> WienerIncrements:
    return WienerIncrements(float(dt), np.zeros((steps, n)), np.zeros((steps, n)), None)


@dataclass(frozen=True)
class Forcing:
    """Noise amplitudes for the potential (``eta``, driven by W^v) and the gating variable (``sigma``, W^w)."""

    eta: NoiseModel = NoiseModel()
    sigma: NoiseModel = NoiseModel()

    @property
    def is_zero(self) -> bool:
        return self.eta.is_zero and self.sigma.is_zero

    @property
    def is_additive(self) -> bool:
        return self.eta.b1 == 0.0 and self.sigma.b1 == 0.0
