"""Meshes, element stiffness, assembly, and equilibrium solves.

Element stiffness is checked against an independent numeric-quadrature oracle
(finite-difference shape gradients), solves against dense LAPACK.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_solve_oracle, element_stiffness_oracle
from topoform import fem
from topoform.errors import SolverError


class TestGridMesh:
    def test_canonical_2d_counts(self):
        mesh = fem.GridMesh((120, 40), element_size=0.5)
        assert mesh.n_elements == 4800
        assert mesh.n_nodes == 4961
        assert mesh.n_dofs == 9922

    def test_canonical_3d_counts(self):
        mesh = fem.GridMesh((60, 20, 4), element_size=1.0)
        assert mesh.n_elements == 4800
        assert mesh.n_nodes == 61 * 21 * 5
        assert mesh.n_dofs == 3 * 61 * 21 * 5

    def test_node_ordering_x_fastest(self):
        mesh = fem.GridMesh((3, 2))
        assert mesh.node_index(0, 0) == 0
        assert mesh.node_index(1, 0) == 1
        assert mesh.node_index(0, 1) == 4
        mesh3 = fem.GridMesh((3, 2, 2))
        assert mesh3.node_index(0, 0, 1) == 12

    def test_element_ordering_x_fastest(self):
        mesh = fem.GridMesh((3, 2))
        assert mesh.element_index(2, 0) == 2
        assert mesh.element_index(0, 1) == 3

    def test_edof_first_element_2d(self):
        mesh = fem.GridMesh((2, 2))
        # nodes (LL, LR, UR, UL) = (0, 1, 4, 3), two dofs each
        np.testing.assert_array_equal(mesh.edof[0], [0, 1, 2, 3, 8, 9, 6, 7])

    def test_edof_first_element_3d(self):
        mesh = fem.GridMesh((2, 2, 2))
        nodes = [0, 1, 4, 3, 9, 10, 13, 12]
        expected = [3 * n + d for n in nodes for d in range(3)]
        np.testing.assert_array_equal(mesh.edof[0], expected)

    def test_element_centers(self):
        mesh = fem.GridMesh((2, 1), element_size=0.5)
        np.testing.assert_allclose(
            mesh.element_centers(), [[0.25, 0.25], [0.75, 0.25]]
        )

    def test_grid_coords_order(self):
        mesh = fem.GridMesh((2, 2))
        np.testing.assert_array_equal(
            mesh.element_grid_coords(), [[0, 0], [1, 0], [0, 1], [1, 1]]
        )

    def test_rejects_bad_dims(self):
        with pytest.raises(ValueError):
            fem.GridMesh((0, 4))
        with pytest.raises(ValueError):
            fem.GridMesh((4,))
        with pytest.raises(ValueError):
            fem.GridMesh((4, 4), element_size=0.0)


class TestElementStiffness:
    @pytest.mark.parametrize("nu", [0.0, 0.2, 0.3, 0.45])
    def test_q4_matches_quadrature_oracle(self, nu):
        mesh = fem.GridMesh((4, 4), element_size=1.0)
        k = fem.element_stiffness(mesh, fem.Material(nu=nu))
        ref = element_stiffness_oracle(2, nu, 1.0)
        np.testing.assert_allclose(k, ref, rtol=0, atol=1e-9)

    def test_q4_independent_of_element_size(self):
        k_a = fem.element_stiffness(fem.GridMesh((4, 4), element_size=1.0))
        k_b = fem.element_stiffness(fem.GridMesh((4, 4), element_size=0.5))
        np.testing.assert_allclose(k_a, k_b, rtol=0, atol=0)
        # the quadrature oracle agrees that plane-stress k is size-free
        ref = element_stiffness_oracle(2, 0.3, 0.37)
        np.testing.assert_allclose(k_a, ref, atol=1e-9)

    @pytest.mark.parametrize("size", [1.0, 0.5])
    def test_hex_matches_quadrature_oracle(self, size):
        mesh = fem.GridMesh((2, 2, 2), element_size=size)
        k = fem.element_stiffness(mesh, fem.Material(nu=0.3))
        ref = element_stiffness_oracle(3, 0.3, size)
        np.testing.assert_allclose(k, ref, rtol=0, atol=1e-9)

    def test_hex_scales_linearly_with_size(self):
        k1 = fem.element_stiffness(fem.GridMesh((2, 2, 2), element_size=1.0))
        k2 = fem.element_stiffness(fem.GridMesh((2, 2, 2), element_size=2.0))
        np.testing.assert_allclose(k2, 2.0 * k1, rtol=1e-12)

    @pytest.mark.parametrize("dims", [(3, 3), (2, 2, 2)])
    def test_symmetric_psd_with_rigid_modes(self, dims):
        mesh = fem.GridMesh(dims)
        k = fem.element_stiffness(mesh)
        np.testing.assert_allclose(k, k.T, atol=1e-12)
        vals = np.linalg.eigvalsh(k)
        assert vals.min() > -1e-10
        n_rigid = 3 if mesh.ndim == 2 else 6
        assert (np.abs(vals) < 1e-10).sum() == n_rigid

    def test_q4_rigid_modes(self):
        k = fem.element_stiffness(fem.GridMesh((2, 2)))
        tx = np.array([1, 0, 1, 0, 1, 0, 1, 0], dtype=float)
        ty = np.array([0, 1, 0, 1, 0, 1, 0, 1], dtype=float)
        # in-plane rotation (x, y) -> (-y, x) at corners (0,0),(1,0),(1,1),(0,1)
        rot = np.array([0, 0, 0, 1, -1, 1, -1, 0], dtype=float)
        for mode in (tx, ty, rot):
            np.testing.assert_allclose(k @ mode, 0.0, atol=1e-12)


class TestAssembly:
    def _dense_reference(self, mesh, densities, material):
        k0 = element_stiffness_oracle(mesh.ndim, material.nu, mesh.element_size)
        K = np.zeros((mesh.n_dofs, mesh.n_dofs))
        E = material.modulus(densities)
        for e in range(mesh.n_elements):
            idx = mesh.edof[e]
            K[np.ix_(idx, idx)] += E[e] * k0
        return K

    def test_matches_dense_loop_2d(self):
        mesh = fem.GridMesh((3, 2), element_size=0.5)
        mat = fem.Material()
        rng = np.random.default_rng(0)
        x = rng.uniform(0.1, 1.0, mesh.n_elements)
        K = fem.assemble_stiffness(mesh, x, mat).toarray()
        np.testing.assert_allclose(K, self._dense_reference(mesh, x, mat), atol=1e-9)

    def test_matches_dense_loop_3d(self):
        mesh = fem.GridMesh((2, 2, 2))
        mat = fem.Material()
        rng = np.random.default_rng(1)
        x = rng.uniform(0.1, 1.0, mesh.n_elements)
        K = fem.assemble_stiffness(mesh, x, mat).toarray()
        np.testing.assert_allclose(K, self._dense_reference(mesh, x, mat), atol=1e-9)

    def test_simp_interpolation_endpoints(self):
        mesh = fem.GridMesh((2, 2))
        mat = fem.Material()
        K_void = fem.assemble_stiffness(mesh, np.zeros(4), mat).toarray()
        K_unit = fem.assemble_stiffness(mesh, np.ones(4), mat).toarray()
        np.testing.assert_allclose(K_void, mat.Emin / mat.E0 * K_unit, rtol=1e-12)

    def test_free_free_translation_null_vector(self):
        mesh = fem.GridMesh((4, 3))
        K = fem.assemble_stiffness(mesh, np.full(12, 0.7), fem.Material())
        t = np.zeros(mesh.n_dofs)
        t[0::2] = 1.0
        np.testing.assert_allclose(K @ t, 0.0, atol=1e-10)

    def test_rejects_invalid_densities(self):
        mesh = fem.GridMesh((2, 2))
        with pytest.raises(ValueError):
            fem.assemble_stiffness(mesh, np.ones(3), fem.Material())
        with pytest.raises(ValueError):
            fem.assemble_stiffness(mesh, np.full(4, 1.5), fem.Material())
        with pytest.raises(ValueError):
            fem.assemble_stiffness(mesh, np.full(4, -0.1), fem.Material())


def _cantilever(dims=(4, 2), element_size=1.0):
    """Left edge fully fixed, unit downward tip load at the right edge."""
    mesh = fem.GridMesh(dims, element_size)
    nx, ny = dims
    fixed = []
    for iy in range(ny + 1):
        n = mesh.node_index(0, iy)
        fixed += [2 * n, 2 * n + 1]
    tip = mesh.node_index(nx, ny // 2)
    bcs = fem.BoundaryConditions(np.array(fixed), {2 * tip + 1: -1.0})
    return mesh, bcs


class TestSolve:
    def test_matches_dense_oracle(self):
        mesh, bcs = _cantilever()
        K = fem.assemble_stiffness(mesh, np.full(mesh.n_elements, 0.6), fem.Material())
        u = fem.solve_equilibrium(K, bcs)
        ref = dense_solve_oracle(K, bcs.force_vector(mesh.n_dofs), bcs.fixed_dofs)
        np.testing.assert_allclose(u, ref, rtol=1e-10, atol=1e-10)

    def test_zero_load_zero_displacement(self):
        mesh, bcs = _cantilever()
        bcs = fem.BoundaryConditions(bcs.fixed_dofs, {})
        K = fem.assemble_stiffness(mesh, np.ones(mesh.n_elements), fem.Material())
        u = fem.solve_equilibrium(K, bcs)
        assert np.all(u == 0.0)

    def test_coincident_loads_sum(self):
        mesh, bcs = _cantilever()
        K = fem.assemble_stiffness(mesh, np.ones(mesh.n_elements), fem.Material())
        dof = next(iter(bcs.loads))
        u1 = fem.solve_equilibrium(K, bcs)
        f2 = bcs.force_vector(mesh.n_dofs)
        assert f2[dof] == -1.0

    def test_iterative_path_agrees_with_direct(self):
        mesh, bcs = _cantilever((6, 3))
        K = fem.assemble_stiffness(mesh, np.full(mesh.n_elements, 0.8), fem.Material())
        u_direct = fem.solve_equilibrium(K, bcs)
        u_cg = fem.solve_equilibrium(K, bcs, direct_limit=0)
        np.testing.assert_allclose(u_cg, u_direct, rtol=1e-6, atol=1e-12)

    def test_singular_system_raises(self):
        mesh = fem.GridMesh((3, 2))
        # one pinned dof leaves rigid-body modes
        bcs = fem.BoundaryConditions(np.array([0]), {mesh.n_dofs - 1: 1.0})
        K = fem.assemble_stiffness(mesh, np.ones(mesh.n_elements), fem.Material())
        with pytest.raises(SolverError):
            fem.solve_equilibrium(K, bcs)

    def test_fixed_dofs_validated(self):
        mesh, bcs = _cantilever()
        K = fem.assemble_stiffness(mesh, np.ones(mesh.n_elements), fem.Material())
        bad = fem.BoundaryConditions(np.array([mesh.n_dofs + 5]), {0: 1.0})
        with pytest.raises(ValueError):
            fem.solve_equilibrium(K, bad)
        with pytest.raises(ValueError):
            fem.BoundaryConditions(np.array([], dtype=int), {0: 1.0})

    def test_compliance_equals_force_dot_displacement(self):
        mesh, bcs = _cantilever()
        mat = fem.Material()
        rng = np.random.default_rng(7)
        x = rng.uniform(0.3, 1.0, mesh.n_elements)
        K = fem.assemble_stiffness(mesh, x, mat)
        u = fem.solve_equilibrium(K, bcs)
        _, total = fem.element_compliance(u, mesh, x, mat)
        f = bcs.force_vector(mesh.n_dofs)
        np.testing.assert_allclose(total, f @ u, rtol=1e-9)

    def test_per_element_compliance_sums_to_total(self):
        mesh, bcs = _cantilever((5, 3))
        mat = fem.Material()
        x = np.full(mesh.n_elements, 0.5)
        K = fem.assemble_stiffness(mesh, x, mat)
        u = fem.solve_equilibrium(K, bcs)
        ce, total = fem.element_compliance(u, mesh, x, mat)
        assert ce.shape == (mesh.n_elements,)
        assert ce.min() >= 0.0
        np.testing.assert_allclose(ce.sum(), total)


@settings(max_examples=15, deadline=None)
@given(
    nx=st.integers(2, 5),
    ny=st.integers(2, 4),
    seed=st.integers(0, 2**31 - 1),
)
def test_solve_residual_property(nx, ny, seed):
    """Any well-posed solve keeps relative residual within 1e-8."""
    rng = np.random.default_rng(seed)
    mesh = fem.GridMesh((nx, ny))
    x = rng.uniform(0.05, 1.0, mesh.n_elements)
    fixed = []
    for iy in range(ny + 1):
        n = mesh.node_index(0, iy)
        fixed += [2 * n, 2 * n + 1]
    load_node = mesh.node_index(nx, int(rng.integers(0, ny + 1)))
    bcs = fem.BoundaryConditions(
        np.array(fixed), {2 * load_node + 1: float(rng.uniform(-2, 2)) or -1.0}
    )
    K = fem.assemble_stiffness(mesh, x, fem.Material())
    u = fem.solve_equilibrium(K, bcs)
    f = bcs.force_vector(mesh.n_dofs)
    free = np.setdiff1d(np.arange(mesh.n_dofs), bcs.fixed_dofs)
    if np.linalg.norm(f[free]) > 0:
        res = np.linalg.norm((K @ u - f)[free]) / np.linalg.norm(f[free])
        assert res <= 1e-8
