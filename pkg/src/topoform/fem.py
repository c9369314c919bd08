"""Regular-grid finite elements: meshes, element stiffness, assembly, equilibrium.

Grids are axis-aligned with uniform square (2D) or cubic (3D) elements.
Numbering is lexicographic with x fastest, then y, then z, for both nodes and
elements; degrees of freedom are node-major with per-node order (x, y[, z]).
Dataset files and model bundles depend on this ordering.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .errors import SolverError

# Direct sparse solve below this many free dofs, conjugate gradient above.
DIRECT_SOLVE_DOF_LIMIT = 50_000

RESIDUAL_TOL = 1e-8


@dataclass
class Material:
    """Isotropic material with SIMP interpolation E(x) = Emin + x^p (E0 - Emin)."""

    E0: float = 1.0
    Emin: float = 1e-9
    nu: float = 0.3
    penal: float = 3.0

    def __post_init__(self):
        if not (0.0 < self.Emin < self.E0):
            raise ValueError(f"require 0 < Emin < E0, got Emin={self.Emin}, E0={self.E0}")
        if not (0.0 <= self.nu < 0.5):
            raise ValueError(f"Poisson ratio must be in [0, 0.5), got {self.nu}")
        if self.penal < 1.0:
            raise ValueError(f"penalization exponent must be >= 1, got {self.penal}")

    def modulus(self, x):
        """Interpolated Young's modulus per element."""
        x = np.asarray(x, dtype=float)
        return self.Emin + x**self.penal * (self.E0 - self.Emin)


class GridMesh:
    """Structured grid of Q4 quads (2D) or 8-node hexahedra (3D).

    Local element node order is counterclockwise from the lower-left corner
    (lower-left, lower-right, upper-right, upper-left), repeated for the far
    z face in 3D.
    """

    def __init__(self, dims, element_size=1.0):
        dims = tuple(int(d) for d in dims)
        if len(dims) not in (2, 3):
            raise ValueError(f"dims must have 2 or 3 entries, got {dims}")
        if any(d < 1 for d in dims):
            raise ValueError(f"all grid dimensions must be >= 1, got {dims}")
        if element_size <= 0:
            raise ValueError(f"element size must be positive, got {element_size}")
        self.dims = dims
        self.element_size = float(element_size)
        self.ndim = len(dims)
        self.dof_per_node = self.ndim
        self.n_elements = int(np.prod(dims))
        node_dims = tuple(d + 1 for d in dims)
        self.node_dims = node_dims
        self.n_nodes = int(np.prod(node_dims))
        self.n_dofs = self.n_nodes * self.dof_per_node
        self.edof = self._build_edof()
        # cached COO index vectors for assembly
        k = self.edof.shape[1]
        self._rows = np.repeat(self.edof, k, axis=1).ravel()
        self._cols = np.tile(self.edof, (1, k)).ravel()

    def node_index(self, ix, iy, iz=0):
        nx1, ny1 = self.node_dims[0], self.node_dims[1]
        return ix + nx1 * (iy + (ny1 * iz if self.ndim == 3 else 0))

    def element_index(self, ix, iy, iz=0):
        nx, ny = self.dims[0], self.dims[1]
        return ix + nx * (iy + (ny * iz if self.ndim == 3 else 0))

    def element_grid_coords(self):
        """Integer (ix, iy[, iz]) per element, shape (n_elements, ndim)."""
        grids = np.meshgrid(*[np.arange(d) for d in self.dims], indexing="ij")
        # x fastest: stack with the last axis varying slowest under ravel order "F"
        coords = np.stack([g.ravel(order="F") for g in grids], axis=1)
        return coords

    def element_centers(self):
        """Physical element centers, shape (n_elements, ndim)."""
        return (self.element_grid_coords() + 0.5) * self.element_size

    def node_coords(self):
        grids = np.meshgrid(*[np.arange(d + 1) for d in self.dims], indexing="ij")
        return np.stack([g.ravel(order="F") for g in grids], axis=1) * self.element_size

    def _build_edof(self):
        if self.ndim == 2:
            nx, ny = self.dims
            ex, ey = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
            ex = ex.ravel(order="F")
            ey = ey.ravel(order="F")
            n0 = ex + (nx + 1) * ey
            nodes = np.stack([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1], axis=1)
        else:
            nx, ny, nz = self.dims
            ex, ey, ez = np.meshgrid(
                np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"
            )
            ex = ex.ravel(order="F")
            ey = ey.ravel(order="F")
            ez = ez.ravel(order="F")
            layer = (nx + 1) * (ny + 1)
            n0 = ex + (nx + 1) * ey + layer * ez
            base = np.stack([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1], axis=1)
            nodes = np.concatenate([base, base + layer], axis=1)
        d = self.dof_per_node
        edof = (nodes[:, :, None] * d + np.arange(d)[None, None, :]).reshape(
            self.n_elements, -1
        )
        return edof.astype(np.int32)


@dataclass
class BoundaryConditions:
    """Fixed dofs plus a sparse map of applied nodal forces (dof index -> value)."""

    fixed_dofs: np.ndarray
    loads: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        self.fixed_dofs = np.unique(np.asarray(self.fixed_dofs, dtype=np.int64))
        if self.fixed_dofs.size == 0:
            raise ValueError("fixed_dofs must be nonempty (rigid-body modes)")
        if self.fixed_dofs.min() < 0:
            raise ValueError("fixed dof indices must be nonnegative")

    def validate(self, n_dofs):
        if self.fixed_dofs.max() >= n_dofs:
            raise ValueError(
                f"fixed dof {self.fixed_dofs.max()} out of range for {n_dofs} dofs"
            )
        for dof in self.loads:
            if not (0 <= dof < n_dofs):
                raise ValueError(f"loaded dof {dof} out of range for {n_dofs} dofs")

    def force_vector(self, n_dofs):
        f = np.zeros(n_dofs)
        for dof, value in self.loads.items():
            f[dof] += value
        return f


# Closed-form Q4 plane-stress stiffness (unit modulus, unit thickness); entries
# are independent of element size. Coefficient table for the local node order
# (LL, LR, UR, UL) with per-node dofs (ux, uy).
_Q4_PATTERN = np.array(
    [
        [2, 7, 0, 4, 5, 1, 6, 3],
        [7, 2, 3, 6, 1, 5, 4, 0],
        [0, 3, 2, 1, 6, 4, 5, 7],
        [4, 6, 1, 2, 3, 0, 7, 5],
        [5, 1, 6, 3, 2, 7, 0, 4],
        [1, 5, 4, 0, 7, 2, 3, 6],
        [6, 4, 5, 7, 0, 3, 2, 1],
        [3, 0, 7, 5, 4, 6, 1, 2],
    ]
)


def _q4_stiffness(nu):
    k = np.array(
        [
            -1 / 4 - nu / 12,
            -1 / 8 - nu / 8,
            1 / 2 - nu / 6,
            1 / 8 - 3 * nu / 8,
            -1 / 8 + 3 * nu / 8,
            -1 / 4 + nu / 12,
            nu / 6,
            1 / 8 + nu / 8,
        ]
    )
    return k[_Q4_PATTERN] / (1 - nu**2)


# Hex8 natural-coordinate sign triples matching the local node order.
HEX_SIGNS = np.array(
    [
        [-1, -1, -1],
        [1, -1, -1],
        [1, 1, -1],
        [-1, 1, -1],
        [-1, -1, 1],
        [1, -1, 1],
        [1, 1, 1],
        [-1, 1, 1],
    ],
    dtype=float,
)

QUAD_SIGNS = HEX_SIGNS[:4, :2]


def elasticity_matrix(ndim, E, nu):
    """Constitutive matrix: plane stress in 2D, isotropic solid in 3D."""
    if ndim == 2:
        return (
            E
            / (1 - nu**2)
            * np.array([[1, nu, 0], [nu, 1, 0], [0, 0, (1 - nu) / 2]])
        )
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    C = np.zeros((6, 6))
    C[:3, :3] = lam
    C[np.arange(3), np.arange(3)] = lam + 2 * mu
    C[np.arange(3, 6), np.arange(3, 6)] = mu
    return C


def shape_gradients(ndim, point, element_size):
    """Physical-space shape-function gradients at a natural-coordinate point.

    Returns an array (n_nodes_per_element, ndim). Valid for the axis-aligned
    square/cube elements used here (constant Jacobian).
    """
    signs = QUAD_SIGNS if ndim == 2 else HEX_SIGNS
    point = np.asarray(point, dtype=float)
    scale = 2.0 / element_size  # d(xi)/d(x) for x = size * (xi + 1) / 2
    n = signs.shape[0]
    grads = np.empty((n, ndim))
    for a in range(n):
        for d in range(ndim):
            term = signs[a, d] / 2**ndim
            for o in range(ndim):
                if o != d:
                    term *= 1 + signs[a, o] * point[o]
            grads[a, d] = term * scale
    return grads


def strain_displacement(ndim, grads):
    """B matrix from shape gradients; engineering shear strains.

    Row order: (exx, eyy, gxy) in 2D; (exx, eyy, ezz, gxy, gyz, gzx) in 3D.
    """
    n = grads.shape[0]
    if ndim == 2:
        B = np.zeros((3, 2 * n))
        B[0, 0::2] = grads[:, 0]
        B[1, 1::2] = grads[:, 1]
        B[2, 0::2] = grads[:, 1]
        B[2, 1::2] = grads[:, 0]
        return B
    B = np.zeros((6, 3 * n))
    B[0, 0::3] = grads[:, 0]
    B[1, 1::3] = grads[:, 1]
    B[2, 2::3] = grads[:, 2]
    B[3, 0::3] = grads[:, 1]
    B[3, 1::3] = grads[:, 0]
    B[4, 1::3] = grads[:, 2]
    B[4, 2::3] = grads[:, 1]
    B[5, 0::3] = grads[:, 2]
    B[5, 2::3] = grads[:, 0]
    return B


def element_stiffness(mesh, material=None):
    """Unit-modulus element stiffness k0 (8x8 Q4 plane stress or 24x24 hex).

    SIMP modulus scaling is applied at assembly time, so k0 always uses E = 1.
    """
    nu = material.nu if material is not None else Material().nu
    if mesh.ndim == 2:
        return _q4_stiffness(nu)
    # 2x2x2 Gauss quadrature, exact for the trilinear hexahedron
    C = elasticity_matrix(3, 1.0, nu)
    g = 1.0 / np.sqrt(3.0)
    size = mesh.element_size
    k0 = np.zeros((24, 24))
    jac = (size / 2.0) ** 3
    for sx in (-g, g):
        for sy in (-g, g):
            for sz in (-g, g):
                B = strain_displacement(3, shape_gradients(3, (sx, sy, sz), size))
                k0 += B.T @ C @ B * jac
    return k0


def assemble_stiffness(mesh, densities, material):
    """Global stiffness with per-element SIMP-interpolated moduli (CSC)."""
    densities = np.asarray(densities, dtype=float)
    if densities.shape != (mesh.n_elements,):
        raise ValueError(
            f"densities must have length {mesh.n_elements}, got {densities.shape}"
        )
    if densities.min() < 0.0 or densities.max() > 1.0:
        raise ValueError("densities must lie in [0, 1]")
    k0 = element_stiffness(mesh, material)
    moduli = material.modulus(densities)
    data = (moduli[:, None] * k0.ravel()[None, :]).ravel()
    K = sparse.coo_matrix(
        (data, (mesh._rows, mesh._cols)), shape=(mesh.n_dofs, mesh.n_dofs)
    )
    return K.tocsc()


def solve_equilibrium(K, bcs, warm_start=None, direct_limit=DIRECT_SOLVE_DOF_LIMIT):
    """Solve K U = F with fixed dofs eliminated; U = 0 at fixed dofs.

    Guarantees a relative residual <= 1e-8 on the free dofs or raises
    SolverError.
    """
    n = K.shape[0]
    bcs.validate(n)
    f = bcs.force_vector(n)
    free = np.setdiff1d(np.arange(n, dtype=np.int64), bcs.fixed_dofs)
    u = np.zeros(n)
    if free.size == 0:
        return u
    ff = f[free]
    fnorm = np.linalg.norm(ff)
    if fnorm == 0.0:
        return u
    Kff = K[free][:, free].tocsc()
    if free.size <= direct_limit:
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            try:
                uf = spla.spsolve(Kff, ff)
            except (spla.MatrixRankWarning, RuntimeError) as exc:
                raise SolverError(f"reduced stiffness matrix is singular: {exc}") from exc
        if not np.all(np.isfinite(uf)):
            raise SolverError("direct solve produced non-finite displacements")
    else:
        x0 = warm_start[free] if warm_start is not None else None
        pre = sparse.diags(1.0 / Kff.diagonal())
        uf, info = spla.cg(Kff, ff, x0=x0, rtol=1e-10, maxiter=20000, M=pre)
        if info != 0:
            raise SolverError(f"conjugate gradient did not converge (info={info})")
    residual = np.linalg.norm(Kff @ uf - ff) / fnorm
    if residual > RESIDUAL_TOL:
        raise SolverError(f"equilibrium residual {residual:.3e} exceeds {RESIDUAL_TOL}")
    u[free] = uf
    return u


def element_strain_energies(u, mesh, material=None):
    """Per-element u_e^T k0 u_e with the unit-modulus stiffness."""
    k0 = element_stiffness(mesh, material)
    ue = u[mesh.edof]
    return np.einsum("ni,ij,nj->n", ue, k0, ue)


def element_compliance(u, mesh, densities, material):
    """Per-element compliances E_e(x_e) u_e^T k0 u_e and their total."""
    ce = material.modulus(densities) * element_strain_energies(u, mesh, material)
    return ce, float(ce.sum())
