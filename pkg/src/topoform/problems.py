"""Parametrized design problems: a 2D half-beam and a 3D half-bridge.

Each problem fixes the mesh, material, optimizer settings, passive regions,
and the set of free parameters (load/support positions); a parameter vector
then determines the boundary conditions. A geometry hash fingerprints all of
it so datasets and models can refuse mismatched inputs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .fem import BoundaryConditions, GridMesh, Material
from .simp import SIMPConfig

GEOMETRY_VERSION = 1


def snap_index(mesh, axis, coord):
    """Nearest node index along one axis (round-half-even, clipped in range)."""
    return int(np.clip(int(np.round(coord / mesh.element_size)), 0, mesh.dims[axis]))


@dataclass(frozen=True)
class ParamSpec:
    name: str
    low: float
    high: float

    def __post_init__(self):
        if not self.high > self.low:
            raise ValueError(f"empty parameter range for {self.name!r}")


@dataclass
class Problem:
    family: str
    mesh: GridMesh
    material: Material
    simp: SIMPConfig
    param_specs: tuple
    passive_solid: np.ndarray | None = None
    passive_void: np.ndarray | None = None
    _bc_builder: object = field(default=None, repr=False, compare=False)

    @property
    def n_params(self) -> int:
        return len(self.param_specs)

    @property
    def param_names(self):
        return [s.name for s in self.param_specs]

    def validate_params(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_params,):
            raise ValueError(
                f"expected {self.n_params} parameters "
                f"({', '.join(self.param_names)}), got shape {values.shape}"
            )
        for spec, v in zip(self.param_specs, values):
            if not (spec.low <= v <= spec.high):
                raise ValueError(
                    f"parameter {spec.name}={v} outside [{spec.low}, {spec.high}]"
                )
        return values

    def boundary_conditions(self, values) -> BoundaryConditions:
        values = self.validate_params(values)
        return self._bc_builder(self, values)

    def snap_node(self, *coords):
        """Nearest grid node to physical coordinates (round-half-even)."""
        idx = [snap_index(self.mesh, d, c) for d, c in enumerate(coords)]
        return self.mesh.node_index(*idx)

    def geometry_text(self) -> str:
        lines = [
            f"geometry/v{GEOMETRY_VERSION}",
            f"family={self.family}",
            "dims=" + "x".join(str(d) for d in self.mesh.dims),
            f"element_size={self.mesh.element_size!r}",
            f"E0={self.material.E0!r}",
            f"Emin={self.material.Emin!r}",
            f"nu={self.material.nu!r}",
            f"penal={self.material.penal!r}",
            f"volfrac={self.simp.volfrac!r}",
            f"rmin={self.simp.rmin!r}",
            f"filter={self.simp.filter_scheme}",
        ]
        lines += [f"param={s.name}:{s.low!r}:{s.high!r}" for s in self.param_specs]
        return "\n".join(lines) + "\n"

    def geometry_hash(self) -> bytes:
        return hashlib.sha256(self.geometry_text().encode("utf-8")).digest()


def _beam_bcs(problem, values):
    """Point load (sin t, -cos t) at the node nearest (x_F, y_F).

    The left edge is a symmetry plane (x-displacements fixed); the bottom-right
    corner node rides a vertical roller (y fixed).
    """
    mesh = problem.mesh
    nx, ny = mesh.dims
    x_f, y_f, theta_deg = values
    fixed = [2 * mesh.node_index(0, iy) for iy in range(ny + 1)]
    fixed.append(2 * mesh.node_index(nx, 0) + 1)
    theta = np.deg2rad(theta_deg)
    node = problem.snap_node(x_f, y_f)
    loads = {}
    for dof, component in ((2 * node, np.sin(theta)), (2 * node + 1, -np.cos(theta))):
        loads[dof] = loads.get(dof, 0.0) + float(component)
    return BoundaryConditions(np.array(fixed, dtype=np.int64), loads)


def mbb_beam(nx=120, ny=40, element_size=0.5) -> Problem:
    """Half MBB beam with a movable, tiltable point load."""
    mesh = GridMesh((nx, ny), element_size)
    width = nx * element_size
    height = ny * element_size
    specs = (
        ParamSpec("x_F", 0.0, width),
        ParamSpec("y_F", 0.0, height),
        ParamSpec("theta", 0.0, 90.0),
    )
    return Problem(
        family="beam2d",
        mesh=mesh,
        material=Material(),
        simp=SIMPConfig(volfrac=0.5, rmin=1.5, filter_scheme="sensitivity"),
        param_specs=specs,
        _bc_builder=_beam_bcs,
    )


def _bridge_passive(mesh):
    """Deck row forced solid; the clear-span box under it forced void."""
    nx, ny, _ = mesh.dims
    deck_row = ny // 2
    x0 = int(round(nx / 4))
    x1 = int(round(3 * nx / 4))
    coords = mesh.element_grid_coords()
    solid = coords[:, 1] == deck_row
    void = (coords[:, 1] < deck_row) & (coords[:, 0] >= x0) & (coords[:, 0] < x1)
    return solid, void


def _bridge_bcs(problem, values):
    """Two deck loads at x_F1/x_F2; support lines pinned at x_S1/x_S2.

    The z=0 face is a symmetry plane (z fixed); support node lines run across
    the full depth at y=0 and are fixed in all directions. Each load is a unit
    force spread uniformly over the nodes across the depth on top of the deck.
    """
    mesh = problem.mesh
    nx, ny, nz = mesh.dims
    x_f1, x_f2, x_s1, x_s2 = values
    deck_top = ny // 2 + 1
    fixed = []
    for ix in range(nx + 1):
        for iy in range(ny + 1):
            fixed.append(3 * mesh.node_index(ix, iy, 0) + 2)
    for x_s in (x_s1, x_s2):
        ix = snap_index(mesh, 0, x_s)
        for iz in range(nz + 1):
            n = mesh.node_index(ix, 0, iz)
            fixed += [3 * n, 3 * n + 1, 3 * n + 2]
    loads = {}
    per_node = -1.0 / (nz + 1)
    for x_f in (x_f1, x_f2):
        ix = snap_index(mesh, 0, x_f)
        for iz in range(nz + 1):
            dof = 3 * mesh.node_index(ix, deck_top, iz) + 1
            loads[dof] = loads.get(dof, 0.0) + per_node
    return BoundaryConditions(np.array(fixed, dtype=np.int64), loads)


def bridge(nx=60, ny=20, nz=4, element_size=1.0) -> Problem:
    """Half-depth bridge: solid deck, clear span, movable loads and supports."""
    mesh = GridMesh((nx, ny, nz), element_size)
    width = nx * element_size
    solid, void = _bridge_passive(mesh)
    specs = (
        ParamSpec("x_F1", 0.0, width),
        ParamSpec("x_F2", 0.0, width),
        ParamSpec("x_S1", 0.0, width / 4),
        ParamSpec("x_S2", 3 * width / 4, width),
    )
    return Problem(
        family="bridge3d",
        mesh=mesh,
        material=Material(),
        simp=SIMPConfig(volfrac=0.12, rmin=float(np.sqrt(3)), filter_scheme="density"),
        param_specs=specs,
        passive_solid=solid,
        passive_void=void,
        _bc_builder=_bridge_bcs,
    )


FAMILIES = {"beam2d": mbb_beam, "bridge3d": bridge}


def make_problem(family, **overrides) -> Problem:
    if family not in FAMILIES:
        raise ValueError(f"unknown problem family {family!r}; know {sorted(FAMILIES)}")
    return FAMILIES[family](**overrides)


def latin_hypercube(param_specs, n, seed):
    """n stratified samples per parameter, one per stratum, strictly inside.

    Deterministic for a given seed; each dimension is an independent
    permutation of the n strata with a uniform offset inside each stratum.
    """
    if n < 1:
        raise ValueError(f"sample count must be positive, got {n}")
    rng = np.random.default_rng(seed)
    out = np.empty((n, len(param_specs)))
    for d, spec in enumerate(param_specs):
        strata = rng.permutation(n)
        offsets = rng.uniform(1e-12, 1.0 - 1e-12, n)
        out[:, d] = spec.low + (strata + offsets) / n * (spec.high - spec.low)
    return out


def mirror_depth(field, mesh):
    """Reflect a half-depth element field across its far z face.

    Returns the doubled field with layout matching a mesh of depth 2*nz;
    element (ix, iy, iz) in the reflected half reads (ix, iy, 2*nz-1-iz).
    """
    if mesh.ndim != 3:
        raise ValueError("depth mirroring is only defined for 3D fields")
    nx, ny, nz = mesh.dims
    vol = np.asarray(field).reshape(nz, ny, nx)
    return np.concatenate([vol, vol[::-1]], axis=0).ravel()
