"""Uniform P1 meshes on boxes and constrained nodal fields.

d = 1: intervals; d = 2: squares split along the main diagonal into two
triangles.  Gradients are piecewise constant; quadrature is one point per
element (the barycenter).  Two constraint kinds are supported: zero trace on
the boundary, and periodic identification of opposite faces with zero nodal
mean (the corrector space of the cell problems).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

__all__ = ["Mesh", "DiscreteField", "build_mesh", "DIRICHLET_ZERO", "PERIODIC_MEAN_ZERO"]

DIRICHLET_ZERO = "dirichlet-zero"
PERIODIC_MEAN_ZERO = "periodic-mean-zero"


@dataclass
class Mesh:
    dimension: int
    n: int
    size: float
    nodes: np.ndarray
    elements: np.ndarray
    volumes: np.ndarray
    barycenters: np.ndarray
    boundary: np.ndarray
    _grad: sp.csr_matrix | None = field(default=None, repr=False)
    _bary: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def h(self) -> float:
        return self.size / self.n

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def gradient_matrix(self) -> sp.csr_matrix:
        """Sparse map nodal values -> stacked element gradients (e*d + axis)."""
        if self._grad is None:
            self._grad = _gradient_matrix(self)
        return self._grad

    def barycenter_matrix(self) -> sp.csr_matrix:
        """Sparse map nodal values -> values at element barycenters."""
        if self._bary is None:
            ne, nv = self.n_elements, self.elements.shape[1]
            rows = np.repeat(np.arange(ne), nv)
            cols = self.elements.ravel()
            vals = np.full(ne * nv, 1.0 / nv)
            self._bary = sp.csr_matrix((vals, (rows, cols)), shape=(ne, self.n_nodes))
        return self._bary

    def element_gradients(self, values: np.ndarray) -> np.ndarray:
        """Per-element gradient of the P1 field, shape (n_elements, d)."""
        return (self.gradient_matrix() @ values).reshape(self.n_elements, self.dimension)


def build_mesh(dimension: int, n: int, size: float = 1.0) -> Mesh:
    """Uniform mesh of [0, size]^d with n subdivisions per axis."""
    if n < 2:
        raise ValueError("need at least 2 subdivisions per axis")
    if dimension not in (1, 2):
        raise ValueError("dimension must be 1 or 2")
    h = size / n
    if dimension == 1:
        nodes = (np.arange(n + 1) * h)[:, None]
        elements = np.stack([np.arange(n), np.arange(n) + 1], axis=1)
        volumes = np.full(n, h)
        boundary = np.zeros(n + 1, dtype=bool)
        boundary[[0, -1]] = True
    else:
        # node id = ix + (n+1) * iy
        ix_n = np.tile(np.arange(n + 1), n + 1)
        iy_n = np.repeat(np.arange(n + 1), n + 1)
        nodes = np.stack([ix_n * h, iy_n * h], axis=1)
        ix = np.tile(np.arange(n), n)
        iy = np.repeat(np.arange(n), n)
        v00 = ix + (n + 1) * iy
        v10 = v00 + 1
        v01 = v00 + (n + 1)
        v11 = v01 + 1
        elements = np.empty((2 * n * n, 3), dtype=np.int64)
        elements[0::2] = np.stack([v00, v10, v11], axis=1)
        elements[1::2] = np.stack([v00, v11, v01], axis=1)
        volumes = np.full(2 * n * n, 0.5 * h * h)
        boundary = (ix_n == 0) | (ix_n == n) | (iy_n == 0) | (iy_n == n)
    barycenters = nodes[elements].mean(axis=1)
    return Mesh(
        dimension=dimension,
        n=n,
        size=size,
        nodes=nodes,
        elements=elements,
        volumes=volumes,
        barycenters=barycenters,
        boundary=boundary,
    )


def _gradient_matrix(mesh: Mesh) -> sp.csr_matrix:
    d, h = mesh.dimension, mesh.h
    ne = mesh.n_elements
    if d == 1:
        rows = np.repeat(np.arange(ne), 2)
        cols = mesh.elements.ravel()
        vals = np.tile([-1.0 / h, 1.0 / h], ne)
        return sp.csr_matrix((vals, (rows, cols)), shape=(ne, mesh.n_nodes))
    # P1 gradients of the two congruent right triangles
    # lower (v00, v10, v11): dx = (u1-u0)/h, dy = (u2-u1)/h
    # upper (v00, v11, v01): dx = (u1-u2)/h, dy = (u2-u0)/h
    coeff_lower = np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0]]) / h
    coeff_upper = np.array([[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0]]) / h
    coeffs = np.empty((ne, 2, 3))
    coeffs[0::2] = coeff_lower
    coeffs[1::2] = coeff_upper
    rows = np.repeat(np.arange(ne * 2), 3)
    cols = np.repeat(mesh.elements, 2, axis=0).ravel()
    return sp.csr_matrix((coeffs.ravel(), (rows, cols)), shape=(ne * 2, mesh.n_nodes))


class Constraint:
    """Reduced parametrization of a constrained nodal space.

    expand maps reduced dofs to the full nodal vector; the transpose maps
    full-space gradients back.  For the periodic kind the expansion matrix
    identifies opposite faces; the zero-mean direction is handled by the
    solvers (energies are gradient-only, so constants are flat directions)
    and normalized away after the solve.
    """

    def __init__(self, mesh: Mesh, kind: str):
        if kind not in (DIRICHLET_ZERO, PERIODIC_MEAN_ZERO):
            raise ValueError(f"unknown constraint kind {kind!r}")
        self.mesh = mesh
        self.kind = kind
        n, d = mesh.n, mesh.dimension
        if kind == DIRICHLET_ZERO:
            free = np.flatnonzero(~mesh.boundary)
            self.n_dofs = free.size
            B = sp.csr_matrix(
                (np.ones(free.size), (free, np.arange(free.size))),
                shape=(mesh.n_nodes, free.size),
            )
        else:
            if d == 1:
                rep = np.arange(n + 1) % n
            else:
                ix = np.tile(np.arange(n + 1), n + 1) % n
                iy = np.repeat(np.arange(n + 1), n + 1) % n
                rep = ix + n * iy
            self.n_dofs = n**d
            B = sp.csr_matrix(
                (np.ones(mesh.n_nodes), (np.arange(mesh.n_nodes), rep)),
                shape=(mesh.n_nodes, self.n_dofs),
            )
        self.matrix = B
        self._matrix_T = B.T.tocsr()

    def expand(self, z: np.ndarray) -> np.ndarray:
        return self.matrix @ z

    def reduce_adjoint(self, g_full: np.ndarray) -> np.ndarray:
        return self._matrix_T @ g_full

    def normalize(self, z: np.ndarray) -> np.ndarray:
        """Project onto the constraint's normal form (zero mean if periodic)."""
        if self.kind == PERIODIC_MEAN_ZERO:
            return z - z.mean()
        return z


@dataclass
class DiscreteField:
    """Nodal P1 function with a constraint kind."""

    mesh: Mesh
    values: np.ndarray
    constraint: str = DIRICHLET_ZERO

    @staticmethod
    def zeros(mesh: Mesh, constraint: str = DIRICHLET_ZERO) -> "DiscreteField":
        return DiscreteField(mesh=mesh, values=np.zeros(mesh.n_nodes), constraint=constraint)

    @staticmethod
    def from_function(
        mesh: Mesh, fn: Callable[[np.ndarray], np.ndarray], constraint: str = DIRICHLET_ZERO
    ) -> "DiscreteField":
        return DiscreteField(mesh=mesh, values=np.asarray(fn(mesh.nodes), dtype=float), constraint=constraint)

    def check(self, tol: float = 1e-12) -> None:
        """Verify the constraint holds on the nodal values."""
        if self.constraint == DIRICHLET_ZERO:
            if np.any(np.abs(self.values[self.mesh.boundary]) > tol):
                raise ValueError("field violates the zero boundary constraint")
        else:
            c = Constraint(self.mesh, PERIODIC_MEAN_ZERO)
            z = self.reduced(c)
            if np.max(np.abs(c.expand(z) - self.values)) > tol:
                raise ValueError("field violates the periodic face identification")
            if abs(z.mean()) > tol:
                raise ValueError("field violates the zero-mean constraint")

    def reduced(self, constraint: "Constraint") -> np.ndarray:
        if constraint.kind == DIRICHLET_ZERO:
            return self.values[~self.mesh.boundary]
        n, d = self.mesh.n, self.mesh.dimension
        if d == 1:
            return self.values[:n].copy()
        grid = self.values.reshape(n + 1, n + 1)  # [iy, ix]
        return grid[:n, :n].ravel()

    def gradients(self) -> np.ndarray:
        return self.mesh.element_gradients(self.values)

    def at_barycenters(self) -> np.ndarray:
        return self.mesh.barycenter_matrix() @ self.values

    def lp_norm(self, p: float) -> float:
        """Discrete L^p norm by barycenter quadrature."""
        vals = np.abs(self.at_barycenters()) ** p
        return float(np.dot(self.mesh.volumes, vals) ** (1.0 / p))

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Evaluate the P1 interpolant at arbitrary points (..., d)."""
        pts = np.asarray(points, dtype=float)
        mesh = self.mesh
        h, n = mesh.h, mesh.n
        if mesh.dimension == 1:
            x = pts[..., 0]
            i = np.clip(np.floor(x / h).astype(int), 0, n - 1)
            lx = x - i * h
            u = self.values
            return u[i] + (u[i + 1] - u[i]) * lx / h
        x, y = pts[..., 0], pts[..., 1]
        ix = np.clip(np.floor(x / h).astype(int), 0, n - 1)
        iy = np.clip(np.floor(y / h).astype(int), 0, n - 1)
        lx, ly = x - ix * h, y - iy * h
        v00 = ix + (n + 1) * iy
        u = self.values
        u00, u10 = u[v00], u[v00 + 1]
        u01, u11 = u[v00 + n + 1], u[v00 + n + 2]
        lower = ly <= lx
        out = np.where(
            lower,
            u00 + (u10 - u00) * lx / h + (u11 - u10) * ly / h,
            u00 + (u11 - u01) * lx / h + (u01 - u00) * ly / h,
        )
        return out


def lp_distance(a: DiscreteField, b: DiscreteField, p: float) -> float:
    """Discrete L^p distance, quadrature taken on a's mesh."""
    pts = a.mesh.barycenters
    diff = np.abs(a.at_barycenters() - b.eval(pts)) ** p
    return float(np.dot(a.mesh.volumes, diff) ** (1.0 / p))
