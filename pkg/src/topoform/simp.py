"""SIMP compliance minimization with optimality-criteria updates.

Two filter schemes: the classic sensitivity filter (2D problems) and the
density filter with chain-rule back-filtering (3D problems). Passive solid /
void elements are pinned on the physical field after filtering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

from .errors import OptimizerError
from .fem import (
    GridMesh,
    Material,
    assemble_stiffness,
    element_strain_energies,
    solve_equilibrium,
)


@dataclass
class SIMPConfig:
    """Optimization constants; defaults follow the classic 88-line values."""

    volfrac: float = 0.5
    rmin: float = 1.5  # filter radius in element-grid units
    filter_scheme: str = "sensitivity"  # "sensitivity" | "density"
    move: float = 0.2
    eta: float = 0.5
    gamma: float = 1e-3  # sensitivity-filter density floor
    change_tol: float = 0.01  # inf-norm of the design update
    max_iters: int = 200
    volume_tol: float = 1e-4
    bisect_lo: float = 1e-9
    bisect_hi: float = 1e9
    bisect_tol: float = 1e-3  # on (hi - lo) / (hi + lo)
    max_bisect: int = 200

    def __post_init__(self):
        if not (0.0 < self.volfrac < 1.0):
            raise ValueError(f"volume fraction must be in (0, 1), got {self.volfrac}")
        if self.rmin <= 0:
            raise ValueError(f"filter radius must be positive, got {self.rmin}")
        if self.filter_scheme not in ("sensitivity", "density"):
            raise ValueError(f"unknown filter scheme {self.filter_scheme!r}")
        if not (0.0 < self.move <= 1.0):
            raise ValueError(f"move limit must be in (0, 1], got {self.move}")


@dataclass
class OptimizeResult:
    x: np.ndarray  # physical densities, one per element
    u: np.ndarray  # displacements at the final densities
    compliance: float
    iterations: int
    converged: bool
    compliance_history: list = field(default_factory=list)
    volume_history: list = field(default_factory=list)
    change_history: list = field(default_factory=list)


def filter_weights(mesh, rmin):
    """Sparse cone weights H_ij = max(0, rmin - dist_ij) and their row sums.

    Distances are between element centers measured in element-grid units, so
    rmin is grid-relative and independent of the physical element size.
    """
    if rmin <= 0:
        raise ValueError(f"filter radius must be positive, got {rmin}")
    dims = mesh.dims
    # ids laid out so ids[..., iy, ix] is the element index (x fastest)
    ids = np.arange(mesh.n_elements).reshape(tuple(reversed(dims)))
    reach = int(np.ceil(rmin)) - 1
    offsets = range(-reach, reach + 1)
    rows, cols, vals = [], [], []
    ndim = mesh.ndim
    for off in np.stack(np.meshgrid(*([list(offsets)] * ndim)), -1).reshape(-1, ndim):
        w = rmin - float(np.linalg.norm(off))
        if w <= 0.0:
            continue
        src = []
        dst = []
        for axis in range(ndim):
            d = int(off[axis])
            n = dims[axis]
            lo, hi = max(0, -d), n - max(0, d)
            # reversed layout: axis 0 of `ids` is the last grid axis
            src.append(slice(lo, hi))
            dst.append(slice(lo + d, hi + d))
        i = ids[tuple(reversed(src))]
        j = ids[tuple(reversed(dst))]
        rows.append(i.ravel())
        cols.append(j.ravel())
        vals.append(np.full(i.size, w))
    H = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.n_elements, mesh.n_elements),
    ).tocsr()
    Hs = np.asarray(H.sum(axis=1)).ravel()
    return H, Hs


def sensitivity_filter(x, dc, H, Hs, gamma=1e-3):
    """Smoothed sensitivities: (H (x*dc)) / (max(gamma, x) * Hs)."""
    return (H @ (x * dc)) / (np.maximum(gamma, x) * Hs)


def density_filter(x, H, Hs):
    """Filtered physical densities (H x) / Hs."""
    return (H @ x) / Hs


def backfilter(grad, H, Hs):
    """Chain rule through the density filter: H^T (grad / Hs)."""
    return H.T @ (grad / Hs)


def compliance_and_sensitivity(mesh, x_phys, material, bcs, warm_start=None):
    """Solve equilibrium and return (c, dc/dx_phys, u).

    dc/dx_e = -p x_e^(p-1) (E0 - Emin) u_e^T k0 u_e, elementwise.
    """
    K = assemble_stiffness(mesh, x_phys, material)
    u = solve_equilibrium(K, bcs, warm_start=warm_start)
    se = element_strain_energies(u, mesh, material)
    c = float((material.modulus(x_phys) * se).sum())
    dc = (
        -material.penal
        * x_phys ** (material.penal - 1)
        * (material.E0 - material.Emin)
        * se
    )
    return c, dc, u


def oc_update(x, dc, dv, volume_target, config, project=None):
    """One optimality-criteria step with bisection on the volume multiplier.

    Returns (x_new, x_phys) where x_phys = project(x_new) (identity when no
    projection is given). The bisection runs until the bracket is tight,
    (hi - lo) / (hi + lo) < bisect_tol, and the physical volume fraction is
    within volume_tol of the target.
    """
    x = np.asarray(x, dtype=float)
    dc = np.asarray(dc, dtype=float)
    dv = np.asarray(dv, dtype=float)
    if np.any(dc > 1e-12):
        raise OptimizerError("compliance sensitivities must be non-positive")
    if np.any(dv <= 0):
        raise OptimizerError("volume sensitivities must be positive")
    lo, hi = config.bisect_lo, config.bisect_hi
    lower = np.maximum(0.0, x - config.move)
    upper = np.minimum(1.0, x + config.move)
    ratio = np.maximum(0.0, -dc / dv)
    x_new = x
    x_phys = project(x) if project is not None else x
    for _ in range(config.max_bisect):
        lmid = 0.5 * (lo + hi)
        x_new = np.clip(x * (ratio / lmid) ** config.eta, lower, upper)
        x_phys = project(x_new) if project is not None else x_new
        vol = float(x_phys.mean())
        if vol > volume_target:
            lo = lmid
        else:
            hi = lmid
        if (hi - lo) / (hi + lo) < config.bisect_tol and abs(
            vol - volume_target
        ) <= config.volume_tol:
            return x_new, x_phys
    raise OptimizerError(
        f"volume-multiplier bisection failed to reach the target fraction "
        f"{volume_target} (last volume {x_phys.mean():.6f})"
    )


def _pin(x, passive_solid, passive_void):
    if passive_solid is not None:
        x = x.copy()
        x[passive_solid] = 1.0
    if passive_void is not None:
        if passive_solid is None:
            x = x.copy()
        x[passive_void] = 0.0
    return x


def optimize(
    mesh,
    bcs,
    material,
    config,
    passive_solid=None,
    passive_void=None,
    x0=None,
    callback=None,
):
    """Run SIMP compliance minimization to convergence.

    Stops when the inf-norm design change drops below config.change_tol or
    after config.max_iters iterations; a final equilibrium solve at the
    converged densities produces the returned displacement field.
    """
    if config.filter_scheme == "sensitivity" and (
        passive_solid is not None or passive_void is not None
    ):
        raise ValueError("passive elements require the density filter scheme")
    H, Hs = filter_weights(mesh, config.rmin)
    n = mesh.n_elements
    x = np.full(n, config.volfrac) if x0 is None else np.asarray(x0, dtype=float).copy()
    density_scheme = config.filter_scheme == "density"
    if density_scheme:
        free = np.ones(n)
        if passive_solid is not None:
            free[passive_solid] = 0.0
        if passive_void is not None:
            free[passive_void] = 0.0
        dv = backfilter(free, H, Hs)
        # pinned elements do not respond to their own design variable; give
        # them the neutral unit slope so the OC ratio stays finite there
        dv = np.where(dv > 1e-12, dv, 1.0)
        project = lambda z: _pin(density_filter(z, H, Hs), passive_solid, passive_void)
        x_phys = project(x)
    else:
        dv = np.ones(n)
        project = None
        x_phys = x
    result = OptimizeResult(
        x=x_phys, u=np.zeros(mesh.n_dofs), compliance=np.inf, iterations=0, converged=False
    )
    u = None
    for it in range(1, config.max_iters + 1):
        c, dc_phys, u = compliance_and_sensitivity(mesh, x_phys, material, bcs, u)
        if density_scheme:
            dc_phys = dc_phys * free  # pinned entries have zero chain-rule slope
            dc = backfilter(dc_phys, H, Hs)
        else:
            dc = sensitivity_filter(x, dc_phys, H, Hs, config.gamma)
        x_new, x_phys_new = oc_update(x, dc, dv, config.volfrac, config, project)
        change = float(np.abs(x_new - x).max())
        x, x_phys = x_new, x_phys_new
        result.compliance_history.append(c)
        result.volume_history.append(float(x_phys.mean()))
        result.change_history.append(change)
        result.iterations = it
        if callback is not None:
            callback(it, x_phys, c, change)
        if change < config.change_tol:
            result.converged = True
            break
    c, _, u = compliance_and_sensitivity(mesh, x_phys, material, bcs, u)
    result.x = x_phys
    result.u = u
    result.compliance = c
    return result
