"""Rectangular domains, the Laplacian eigenbasis and Galerkin assembly.

The basis is the closed-form eigenbasis of the Laplacian on a box with
homogeneous Dirichlet data on a union of whole faces and zero flux on the
rest. Per axis the eigenfunctions are

    D-D :  sqrt(2/L) sin(p pi x / L)             p = 1, 2, ...
    D-N :  sqrt(2/L) sin((p - 1/2) pi x / L)
    N-D :  sqrt(2/L) cos((p - 1/2) pi x / L)
    N-N :  sqrt(1/L), sqrt(2/L) cos((p - 1) pi x / L)

and 2D modes are tensor products. The family is orthonormal in L2 and
orthogonal in the H1 seminorm, so the mass matrix is the identity and the
Laplacian stiffness is diag(lambda).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

FACES = {1: ("x0", "x1"), 2: ("x0", "x1", "y0", "y1")}


@dataclass(frozen=True)
class Domain:
    """Box ``[0, L_1] x ... x [0, L_dim]`` with a Dirichlet/Neumann face split.

    Faces are named ``x0`` (x = 0), ``x1`` (x = L_x), ``y0`` and ``y1``.
    """

    lengths: tuple[float, ...]
    dirichlet_faces: frozenset[str]

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.lengths)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "dirichlet_faces", frozenset(self.dirichlet_faces))
        if len(lengths) not in FACES:
            raise ValueError(f"only 1D and 2D boxes are supported, got dim={len(lengths)}")
        if any(not (v > 0) for v in lengths):
            raise ValueError(f"lengths must be strictly positive, got {lengths}")
        unknown = self.dirichlet_faces - set(FACES[self.dim])
        if unknown:
            raise ValueError(f"unknown faces {sorted(unknown)}; valid faces are {FACES[self.dim]}")
        if not self.dirichlet_faces:
            raise ValueError("dirichlet_faces must be nonempty (Sigma_D != empty is required for the Poincare bound)")

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def neumann_faces(self) -> frozenset[str]:
        return frozenset(FACES[self.dim]) - self.dirichlet_faces

    @property
    def measure(self) -> float:
        return float(np.prod(self.lengths))

    def axis_bc(self, axis: int) -> str:
        """Two-letter boundary type of an axis, e.g. ``"DN"`` for Dirichlet at 0."""
        lo, hi = FACES[2][2 * axis], FACES[2][2 * axis + 1]
        return ("D" if lo in self.dirichlet_faces else "N") + ("D" if hi in self.dirichlet_faces else "N")

    def face_points(self, face: str, count: int = 11) -> np.ndarray:
        """Evenly spaced sample points on a face, shape ``(count, dim)``."""
        axis = "xy".index(face[0])
        value = 0.0 if face[1] == "0" else self.lengths[axis]
        if self.dim == 1:
            return np.array([[value]])
        other = 1 - axis
        pts = np.empty((count, 2))
        pts[:, axis] = value
        pts[:, other] = np.linspace(0.0, self.lengths[other], count)
        return pts


def _wavenumber(bc: str, p: int, length: float) -> float:
    if bc == "DD":
        return p * math.pi / length
    if bc == "NN":
        return (p - 1) * math.pi / length
    return (p - 0.5) * math.pi / length


def _axis_values(bc: str, p: int, length: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Value and derivative of the ``p``-th (1-based) axis eigenfunction."""
    k = _wavenumber(bc, p, length)
    if bc == "NN" and p == 1:
        c = 1.0 / math.sqrt(length)
        return np.full_like(x, c), np.zeros_like(x)
    c = math.sqrt(2.0 / length)
    if bc in ("DD", "DN"):
        return c * np.sin(k * x), c * k * np.cos(k * x)
    return c * np.cos(k * x), -c * k * np.sin(k * x)


def gauss_legendre_grid(lengths: Sequence[float], orders: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre points ``(Q, dim)`` and weights ``(Q,)`` on a box."""
    nodes, weights = [], []
    for length, order in zip(lengths, orders):
        t, w = np.polynomial.legendre.leggauss(int(order))
        nodes.append(0.5 * length * (t + 1.0))
        weights.append(0.5 * length * w)
    mesh = np.meshgrid(*nodes, indexing="ij")
    wmesh = np.meshgrid(*weights, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    return points, np.prod(np.stack([w.ravel() for w in wmesh]), axis=0)


@dataclass(frozen=True, eq=False)
class BasisSet:
    """First ``n`` eigenfunctions of the mixed Laplacian plus a quadrature grid.

    ``values[l, q]`` is e_l at quadrature point q and ``grads[l, q, :]`` its
    gradient, so L2 inner products are ``values @ (weights * f)``.
    """

    domain: Domain
    modes: tuple[tuple[int, ...], ...]
    eigenvalues: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    values: np.ndarray = field(repr=False)
    grads: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.modes)

    def mode_values(self, points: np.ndarray) -> np.ndarray:
        """Basis functions at arbitrary points, shape ``(n, len(points))``."""
        vals, _ = _tensor_modes(self.domain, self.modes, np.atleast_2d(points))
        return vals

    def mass_matrix(self) -> np.ndarray:
        return (self.values * self.weights) @ self.values.T

    def laplacian_stiffness(self) -> np.ndarray:
        return np.einsum("lqi,mqi,q->lm", self.grads, self.grads, self.weights)

    def integrate(self, samples: np.ndarray) -> np.ndarray:
        """Quadrature of samples over the last axis."""
        return samples @ self.weights

    def inner(self, samples: np.ndarray) -> np.ndarray:
        """``(f, e_l)`` for samples ``f`` at the quadrature points (last axis)."""
        return (samples * self.weights) @ self.values.T

    def field(self, coeffs: np.ndarray) -> np.ndarray:
        """Sum of ``coeffs[l] e_l`` at the quadrature points."""
        return np.asarray(coeffs) @ self.values


def _tensor_modes(domain: Domain, modes, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    npts = points.shape[0]
    vals = np.ones((len(modes), npts))
    grads = np.ones((len(modes), npts, domain.dim))
    for m, idx in enumerate(modes):
        for axis, p in enumerate(idx):
            f, df = _axis_values(domain.axis_bc(axis), p, domain.lengths[axis], points[:, axis])
            vals[m] *= f
            for g in range(domain.dim):
                grads[m, :, g] *= df if g == axis else f
    return vals, grads


def enumerate_modes(domain: Domain, n: int) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """The ``n`` lowest modes, ordered by eigenvalue then lexicographically."""
    candidates = []
    for idx in itertools.product(range(1, n + 1), repeat=domain.dim):
        lam = sum(_wavenumber(domain.axis_bc(a), p, domain.lengths[a]) ** 2 for a, p in enumerate(idx))
        # rounding makes symmetric ties (e.g. (1,2) vs (2,1) on a square) exact
        candidates.append((float(f"{lam:.12e}"), idx, lam))
    candidates.sort(key=lambda c: (c[0], c[1]))
    chosen = candidates[:n]
    return [c[1] for c in chosen], np.array([c[2] for c in chosen])


def default_quad_order(max_index: int) -> int:
    # exact (to round-off) for products of four modes, i.e. the cubic ionic term
    return int(math.ceil(math.pi * max_index)) + 12


def build_basis(domain: Domain, n: int, quad_order: int | Sequence[int] | None = None) -> BasisSet:
    """Build the ``n``-mode basis with a tensor Gauss-Legendre grid.

    ``quad_order`` is the number of points per axis; by default it is sized to
    integrate quartic products of the retained modes without aliasing.
    """
    if n < 1:
        raise ValueError(f"basis size must be >= 1, got {n}")
    if not domain.dirichlet_faces:
        raise ValueError("domain has no Dirichlet faces")
    modes, eigenvalues = enumerate_modes(domain, n)
    if quad_order is None:
        orders = [default_quad_order(max(m[a] for m in modes)) for a in range(domain.dim)]
    elif np.isscalar(quad_order):
        orders = [int(quad_order)] * domain.dim
    else:
        orders = [int(q) for q in quad_order]
    if any(q < 1 for q in orders):
        raise ValueError(f"quad_order must be positive, got {orders}")
    points, weights = gauss_legendre_grid(domain.lengths, orders)
    values, grads = _tensor_modes(domain, modes, points)
    return BasisSet(domain, tuple(modes), eigenvalues, points, weights, values, grads)


@dataclass(frozen=True)
class ConductivityField:
    """Intra- and extracellular conductivity tensors ``M_j = s_t I + (s_l - s_t) a a^T``.

    ``kind="constant"`` uses a fixed fiber direction at ``fiber_angle``
    (radians from the x axis); ``kind="axisymmetric"`` takes a callable
    mapping points ``(Q, dim)`` to unit fiber vectors ``(Q, dim)``.
    """

    dim: int
    sigma_l_i: float
    sigma_t_i: float
    sigma_l_e: float
    sigma_t_e: float
    kind: str = "constant"
    fiber_angle: float = 0.0
    fiber_direction: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "axisymmetric"):
            raise ValueError(f"unknown conductivity kind {self.kind!r}")
        if self.kind == "axisymmetric" and self.fiber_direction is None:
            raise ValueError("axisymmetric conductivity needs a fiber_direction field")
        sig = (self.sigma_l_i, self.sigma_t_i, self.sigma_l_e, self.sigma_t_e)
        if any(not (s > 0) for s in sig):
            raise ValueError(f"conductivities must be positive, got {sig}")

    @property
    def ellipticity(self) -> tuple[float, float]:
        """Uniform bounds ``(m, M)`` on the spectra of both tensors."""
        if self.dim == 1:
            sig = (self.sigma_l_i, self.sigma_l_e)
        else:
            sig = (self.sigma_l_i, self.sigma_t_i, self.sigma_l_e, self.sigma_t_e)
        return min(sig), max(sig)

    def fibers(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if self.kind == "axisymmetric":
            a = np.asarray(self.fiber_direction(points), dtype=float).reshape(len(points), self.dim)
            return a
        if self.dim == 1:
            return np.ones((len(points), 1))
        a = np.array([math.cos(self.fiber_angle), math.sin(self.fiber_angle)])
        return np.broadcast_to(a, (len(points), 2)).copy()

    def tensor(self, which: str, points: np.ndarray) -> np.ndarray:
        """Conductivity tensor field at ``points``, shape ``(Q, dim, dim)``."""
        if which in ("intra", "i"):
            sl, st = self.sigma_l_i, self.sigma_t_i
        elif which in ("extra", "e"):
            sl, st = self.sigma_l_e, self.sigma_t_e
        else:
            raise ValueError(f"which must be 'intra' or 'extra', got {which!r}")
        a = self.fibers(points)
        eye = np.eye(self.dim)
        return st * eye + (sl - st) * np.einsum("qi,qj->qij", a, a)

    def check(self, points: np.ndarray, atol: float = 1e-12) -> dict:
        """Worst symmetry defect, ellipticity margins and fiber-length defect."""
        m, M = self.ellipticity
        out = {"symmetry": 0.0, "lower_margin": np.inf, "upper_margin": np.inf, "fiber_norm_defect": 0.0}
        out["fiber_norm_defect"] = float(np.max(np.abs(np.linalg.norm(self.fibers(points), axis=1) - 1.0)))
        for which in ("intra", "extra"):
            T = self.tensor(which, points)
            out["symmetry"] = max(out["symmetry"], float(np.max(np.abs(T - np.swapaxes(T, 1, 2)))))
            eig = np.linalg.eigvalsh(T)
            out["lower_margin"] = min(out["lower_margin"], float(eig.min() - m))
            out["upper_margin"] = min(out["upper_margin"], float(M - eig.max()))
        out["ok"] = (out["symmetry"] <= atol and out["lower_margin"] >= -atol
                     and out["upper_margin"] >= -atol and out["fiber_norm_defect"] <= 1e-10)
        return out

    def scaled(self, factor: float) -> "ConductivityField":
        return ConductivityField(self.dim, factor * self.sigma_l_i, factor * self.sigma_t_i,
                                 factor * self.sigma_l_e, factor * self.sigma_t_e,
                                 self.kind, self.fiber_angle, self.fiber_direction)

    def proportionality(self, rtol: float = 1e-12) -> float | None:
        """``lambda`` with ``M_i = lambda M_e`` if the tensors are proportional, else None."""
        lam = self.sigma_l_i / self.sigma_l_e
        if self.dim == 1 or math.isclose(self.sigma_t_i / self.sigma_t_e, lam, rel_tol=rtol):
            return lam
        return None


def assemble_stiffness(basis: BasisSet, conductivity: ConductivityField, which: str) -> np.ndarray:
    """``K[l, m] = int M_j grad e_m . grad e_l dx`` by quadrature, symmetrized."""
    if conductivity.dim != basis.domain.dim:
        raise ValueError(f"conductivity is {conductivity.dim}D but the basis is {basis.domain.dim}D")
    T = conductivity.tensor(which, basis.points)
    flux = np.einsum("qij,mqj->mqi", T, basis.grads)
    K = np.einsum("lqi,mqi,q->lm", basis.grads, flux, basis.weights)
    return 0.5 * (K + K.T)


def project(field_sampler: Callable[[np.ndarray], np.ndarray], basis: BasisSet) -> np.ndarray:
    """L2 projection coefficients ``(f, e_l)`` of a pointwise sampler."""
    samples = np.asarray(field_sampler(basis.points), dtype=float).reshape(-1)
    return basis.inner(samples)


def evaluate(coeffs: np.ndarray, basis: BasisSet, points: np.ndarray) -> np.ndarray:
    """Samples of ``sum_l coeffs[l] e_l`` at ``points`` (shape ``(P, dim)``)."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[-1] != basis.n:
        raise ValueError(f"expected {basis.n} coefficients, got {coeffs.shape[-1]}")
    points = np.asarray(points, dtype=float).reshape(-1, basis.domain.dim)
    return coeffs @ basis.mode_values(points)
