"""Element stress recovery and the derived scalar fields.

Stresses are evaluated at element centroids from the displacement field using
the full material modulus E0 everywhere (not the SIMP-interpolated one): the
fields describe the load path through the design, and intermediate densities
would otherwise hide it.
"""

from __future__ import annotations

import numpy as np

from .fem import Material, elasticity_matrix, shape_gradients, strain_displacement


def element_stress_components(mesh, u, material=None):
    """Centroid stress per element.

    Returns (n_elements, 3) as (sxx, syy, sxy) in 2D, or (n_elements, 6) as
    (sxx, syy, szz, sxy, syz, szx) in 3D.
    """
    material = material or Material()
    center = np.zeros(mesh.ndim)
    B = strain_displacement(
        mesh.ndim, shape_gradients(mesh.ndim, center, mesh.element_size)
    )
    C = elasticity_matrix(mesh.ndim, material.E0, material.nu)
    ue = u[mesh.edof]  # (n_elements, dofs_per_element)
    return ue @ (C @ B).T


def von_mises(stress, ndim):
    """Von Mises equivalent stress from centroid components."""
    s = np.asarray(stress, dtype=float)
    if ndim == 2:
        sx, sy, txy = s[:, 0], s[:, 1], s[:, 2]
        return np.sqrt(sx**2 + sy**2 - sx * sy + 3.0 * txy**2)
    sx, sy, sz, txy, tyz, tzx = (s[:, i] for i in range(6))
    return np.sqrt(
        0.5 * ((sx - sy) ** 2 + (sy - sz) ** 2 + (sz - sx) ** 2)
        + 3.0 * (txy**2 + tyz**2 + tzx**2)
    )


def dominant_principal(stress, ndim):
    """Signed principal stress of largest magnitude, per element.

    Positive values mark tension-dominated elements, negative compression;
    exact magnitude ties resolve to the tensile value.
    """
    s = np.asarray(stress, dtype=float)
    if ndim == 2:
        sx, sy, txy = s[:, 0], s[:, 1], s[:, 2]
        center = 0.5 * (sx + sy)
        radius = np.sqrt((0.5 * (sx - sy)) ** 2 + txy**2)
        s1 = center + radius
        s2 = center - radius
        # tie window matches the 3D spectral branch below
        a1, a2 = np.abs(s1), np.abs(s2)
        return np.where(a1 >= a2 * (1.0 - 1e-12), s1, s2)
    n = s.shape[0]
    tensors = np.empty((n, 3, 3))
    tensors[:, 0, 0] = s[:, 0]
    tensors[:, 1, 1] = s[:, 1]
    tensors[:, 2, 2] = s[:, 2]
    tensors[:, 0, 1] = tensors[:, 1, 0] = s[:, 3]
    tensors[:, 1, 2] = tensors[:, 2, 1] = s[:, 4]
    tensors[:, 0, 2] = tensors[:, 2, 0] = s[:, 5]
    vals = np.linalg.eigvalsh(tensors)  # ascending per element
    mags = np.abs(vals)
    peak = mags.max(axis=1, keepdims=True)
    at_peak = mags >= peak * (1.0 - 1e-12)
    return np.where(at_peak, vals, -np.inf).max(axis=1)


def stress_fields(mesh, u, material=None):
    """Raw (von_mises, dominant_principal) element fields for a solution."""
    s = element_stress_components(mesh, u, material)
    return von_mises(s, mesh.ndim), dominant_principal(s, mesh.ndim)


def normalize_field(values, signed=False):
    """Scale a field into [0, 1] (or [-1, 1] when signed) by its peak magnitude.

    Returns (normalized, scale) with scale = max |values|; an all-zero field
    keeps scale 1 so normalization is always invertible.
    """
    values = np.asarray(values, dtype=float)
    scale = float(np.abs(values).max()) if values.size else 0.0
    if scale == 0.0:
        scale = 1.0
    out = values / scale
    if not signed:
        out = np.clip(out, 0.0, 1.0)
    return out, scale


def combined_field(densities, normalized_stress):
    """Elementwise product x * s: stress masked to the material layout."""
    return np.asarray(densities, dtype=float) * np.asarray(normalized_stress, dtype=float)
