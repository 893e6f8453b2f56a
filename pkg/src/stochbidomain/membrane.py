"""FitzHugh-Nagumo membrane kinetics and certified structural constants.

The ionic current and gating rate have the generalized FitzHugh-Nagumo form

    I(v, w) = I1(v) + I2(v) w,   I1(v) = v^3 - (1 + a) v^2 + a v,   I2 = c_I3 + c_I4 v
    H(v, w) = h(v) + c_H1 w,     h(v) = eps kappa v,                c_H1 = -eps gamma

The growth/coercivity constants used by the energy and uniqueness estimates
are computed once per model by brute-force search on a dense grid (then
polished with a bounded scalar search and padded by a small slack), so every
stored constant comes with a numerical certificate rather than a hand bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

GRID_HALF_WIDTH = 10.0
GRID_POINTS = 20001
SLACK = 1e-6


@dataclass(frozen=True)
class StructuralConstants:
    c_I1: float
    c_I2: float
    c_I3: float
    c_I4: float
    c_lower_I: float
    c_H1: float
    c_H2: float
    C1: float
    C2: float
    C3: float
    pair_lipschitz: float

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class MembraneModel:
    """FHN kinetics with threshold ``a``, excitability ``eps`` and gating ``kappa``, ``gamma``."""

    a: float = 0.1
    eps: float = 0.01
    kappa: float = 1.0
    gamma: float = 0.5
    c_I3: float = 1.0
    c_I4: float = 0.0
    c_lower_I: float = 0.5
    enabled: bool = True
    constants: StructuralConstants = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0.0 < self.a < 1.0):
            raise ValueError(f"threshold a must lie in (0, 1), got {self.a}")
        if self.eps <= 0:
            raise ValueError(f"excitability eps must be positive, got {self.eps}")
        if self.c_I4 != 0.0:
            # the cross term v*w breaks the global one-sided Lipschitz pairing
            raise NotImplementedError("only constant I2 (c_I4 = 0) is supported")
        object.__setattr__(self, "constants", certify_constants(self))

    def I1(self, v):
        return v * (v - self.a) * (v - 1.0)

    def h(self, v):
        return self.eps * self.kappa * v

    @property
    def c_H1(self) -> float:
        return -self.eps * self.gamma

    def off(self) -> "MembraneModel":
        """Same parameters with I = H = 0 (pure diffusion runs)."""
        return replace(self, enabled=False)


def ion_current(model: MembraneModel, v, w):
    """``I(v, w) = I1(v) + (c_I3 + c_I4 v) w``; for FHN this is ``-v (v - a)(1 - v) + w``."""
    if not model.enabled:
        return np.zeros(np.broadcast(v, w).shape)
    return model.I1(v) + (model.c_I3 + model.c_I4 * v) * w


def gating_rhs(model: MembraneModel, v, w):
    """``H(v, w) = eps (kappa v - gamma w)``."""
    if not model.enabled:
        return np.zeros(np.broadcast(v, w).shape)
    return model.h(v) + model.c_H1 * w


def _polished_max(fun, grid: np.ndarray) -> float:
    """Grid maximum of ``fun`` refined by a bounded search around the best node."""
    vals = fun(grid)
    i = int(np.nanargmax(vals))
    best = float(vals[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if hi > lo:
        res = minimize_scalar(lambda x: -float(fun(np.array([x]))[0]), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


def certify_constants(model: MembraneModel) -> StructuralConstants:
    """Brute-force the structural constants over ``|v|, |w| <= 10``."""
    v = np.linspace(-GRID_HALF_WIDTH, GRID_HALF_WIDTH, GRID_POINTS)
    c_lower = model.c_lower_I

    c_I1 = _polished_max(lambda x: np.abs(model.I1(x)) / (1.0 + np.abs(x) ** 3), v)
    c_I1 = c_I1 * (1 + SLACK) + SLACK

    def coercive_gap(x):
        with np.errstate(invalid="ignore", divide="ignore"):
            out = (c_lower * x**4 - model.I1(x) * x) / x**2
        return np.where(x == 0, -model.a, out)

    c_I2 = max(_polished_max(coercive_gap, v), 0.0) * (1 + SLACK) + SLACK
    c_H2 = _polished_max(lambda x: model.h(x) ** 2 / (1.0 + x**2), v) * (1 + SLACK) + SLACK

    # w H - v I <= -C1 v^4 + C2 (v^2 + w^2) + C3 with C1 = c_lower_I and C3 = 0:
    # C2 is the sup of the homogenized ratio, sampled on a polar grid.
    C1 = c_lower
    theta = np.linspace(0.0, 2 * math.pi, 721)
    radius = np.concatenate([np.geomspace(1e-6, 1.0, 200), np.linspace(1.0, GRID_HALF_WIDTH * math.sqrt(2), 400)])
    R, TH = np.meshgrid(radius, theta, indexing="ij")
    vv, ww = R * np.cos(TH), R * np.sin(TH)
    pairing = ww * (model.h(vv) + model.c_H1 * ww) - vv * (model.I1(vv) + model.c_I3 * ww)
    ratio = (pairing + C1 * vv**4) / (vv**2 + ww**2)
    C2 = max(float(ratio.max()), 0.0)
    C2 = C2 * (1 + 1e-3) + SLACK
    C3 = 0.0

    # one-sided Lipschitz pairing: -(I1(v1) - I1(v2))(v1 - v2) <= -min I1' |dv|^2, and the
    # bilinear part (eps kappa - c_I3) dv dw - eps gamma dw^2 is bounded by its top eigenvalue.
    dI1 = 3 * v**2 - 2 * (1 + model.a) * v + model.a
    min_slope = -_polished_max(lambda x: -(3 * x**2 - 2 * (1 + model.a) * x + model.a), v)
    min_slope = min(min_slope, float(dI1.min()))
    cross = model.eps * model.kappa - model.c_I3
    quad = np.array([[-min_slope, 0.5 * cross], [0.5 * cross, model.c_H1]])
    pair = float(np.linalg.eigvalsh(quad).max())
    pair = max(pair, 0.0) * (1 + SLACK) + SLACK

    return StructuralConstants(c_I1=c_I1, c_I2=c_I2, c_I3=model.c_I3, c_I4=model.c_I4,
                               c_lower_I=c_lower, c_H1=model.c_H1, c_H2=c_H2,
                               C1=C1, C2=C2, C3=C3, pair_lipschitz=pair)


@dataclass
class StructuralReport:
    """Worst signed margin per structural inequality (all must be >= 0)."""

    margins: dict
    worst_points: dict
    constants: dict

    @property
    def ok(self) -> bool:
        return all(m >= 0 for m in self.margins.values())

    @property
    def violations(self) -> dict:
        return {k: self.worst_points[k] for k, m in self.margins.items() if m < 0}

    def to_dict(self) -> dict:
        return {"ok": self.ok, "margins": self.margins, "worst_points": self.worst_points,
                "violations": self.violations, "constants": self.constants}


def check_structural_bounds(model: MembraneModel, v_range=(-GRID_HALF_WIDTH, GRID_HALF_WIDTH),
                            samples: int = 10_000, constants: StructuralConstants | None = None,
                            w_range=None) -> StructuralReport:
    """Evaluate the growth/coercivity inequalities and the dissipation bound on a grid.

    ``v_range`` may be a degenerate interval such as ``(0, 0)``. If ``w_range``
    is given, the dissipation bound is also checked on the ``samples``-point
    tensor grid over ``v_range x w_range``.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    k = model.constants if constants is None else constants
    v = np.linspace(float(v_range[0]), float(v_range[-1]), samples)
    I1 = model.I1(v)
    h = model.h(v)
    checks = {
        "I1_growth": k.c_I1 * (1 + np.abs(v) ** 3) - np.abs(I1),
        "I1_coercivity": I1 * v - (k.c_lower_I * v**4 - k.c_I2 * v**2),
        "h_growth": k.c_H2 * (1 + v**2) - h**2,
    }
    margins, worst = {}, {}
    for name, m in checks.items():
        i = int(np.argmin(m))
        margins[name] = float(m[i])
        worst[name] = {"v": float(v[i])}
    if w_range is not None:
        side = max(int(round(math.sqrt(samples))), 2)
        vv, ww = np.meshgrid(np.linspace(v_range[0], v_range[-1], side),
                             np.linspace(w_range[0], w_range[-1], side), indexing="ij")
        res = dissipation_bound(model, vv, ww, constants=k)
        i = np.unravel_index(int(np.argmin(res)), res.shape)
        margins["dissipation"] = float(res[i])
        worst["dissipation"] = {"v": float(vv[i]), "w": float(ww[i])}
    return StructuralReport(margins, worst, k.to_dict())


def dissipation_bound(model: MembraneModel, v, w, constants: StructuralConstants | None = None):
    """``[-C1 v^4 + C2 (v^2 + w^2) + C3] - [w H(v, w) - v I(v, w)]`` (nonnegative)."""
    k = model.constants if constants is None else constants
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    bound = -k.C1 * v**4 + k.C2 * (v**2 + w**2) + k.C3
    return bound - (w * gating_rhs(model, v, w) - v * ion_current(model, v, w))


def pairing(model: MembraneModel, v1, w1, v2, w2):
    """``(H1 - H2)(w1 - w2) - (I1 - I2)(v1 - v2)`` for two states."""
    dH = gating_rhs(model, v1, w1) - gating_rhs(model, v2, w2)
    dI = ion_current(model, v1, w1) - ion_current(model, v2, w2)
    return dH * (w1 - w2) - dI * (v1 - v2)
