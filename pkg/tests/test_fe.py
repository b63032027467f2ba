import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import dense_tables, naive_interp
from tmopbench import fe
from tmopbench.mesh import build_box
from tmopbench.metrics import det

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def make_em(order, n_q):
    basis = fe.Basis1D.gauss_lobatto(order)
    return basis, fe.build_eval_matrices(basis, fe.gauss_legendre_1d(n_q))


class TestQuadrature:
    def test_midpoint_rule(self):
        rule = fe.gauss_legendre_1d(1)
        assert rule.points == pytest.approx([0.5])
        assert rule.weights == pytest.approx([1.0])

    def test_two_point_rule(self):
        rule = fe.gauss_legendre_1d(2)
        off = 1.0 / (2.0 * np.sqrt(3.0))
        assert np.allclose(np.sort(rule.points), [0.5 - off, 0.5 + off], atol=1e-15)
        assert rule.weights == pytest.approx([0.5, 0.5], abs=1e-15)

    def test_cubic_exactness(self):
        rule = fe.gauss_legendre_1d(2)
        integral = np.sum(rule.weights * rule.points**3)
        assert integral == pytest.approx(0.25, abs=1e-14)

    @pytest.mark.parametrize("n_q", range(1, 9))
    def test_exactness_up_to_degree(self, n_q):
        rule = fe.gauss_legendre_1d(n_q)
        assert rule.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(rule.weights > 0)
        assert np.all((rule.points > 0) & (rule.points < 1))
        for deg in range(2 * n_q):
            got = np.sum(rule.weights * rule.points**deg)
            assert got == pytest.approx(1.0 / (deg + 1), abs=1e-12), deg

    @pytest.mark.parametrize("n_q", [0, -1, 33])
    def test_out_of_range(self, n_q):
        with pytest.raises(ValueError):
            fe.gauss_legendre_1d(n_q)


class TestBasisTables:
    def test_linear_rows(self):
        _, em = make_em(1, 3)
        chi = fe.gauss_legendre_1d(3).points
        assert np.allclose(em.b, np.stack([1 - chi, chi], axis=1), atol=1e-14)
        assert np.allclose(em.g, np.tile([-1.0, 1.0], (3, 1)), atol=1e-14)

    def test_delta_property_at_nodes(self):
        basis = fe.Basis1D.gauss_lobatto(4)
        assert np.allclose(basis.eval_values(basis.nodes), np.eye(5), atol=1e-13)

    def test_polynomial_reproduction(self):
        basis, em = make_em(3, 4)
        chi = fe.gauss_legendre_1d(4).points
        vals = em.b @ basis.nodes**2
        assert np.allclose(vals, chi**2, atol=1e-12)
        ders = em.g @ basis.nodes**3
        assert np.allclose(ders, 3 * chi**2, atol=1e-12)

    @pytest.mark.parametrize("order,n_q", [(1, 2), (2, 3), (3, 5), (4, 6), (6, 8)])
    def test_row_sums(self, order, n_q):
        _, em = make_em(order, n_q)
        assert np.allclose(em.b.sum(axis=1), 1.0, atol=1e-13)
        assert np.allclose(em.g.sum(axis=1), 0.0, atol=1e-13)

    def test_quad_point_coinciding_with_node(self):
        # order 2 with 3 Gauss points puts chi = 0.5 exactly on the middle node
        basis, em = make_em(2, 3)
        mid = 1  # the 0.5 Gauss point is the middle of the sorted triple
        assert np.allclose(em.b[mid], [0.0, 1.0, 0.0], atol=1e-14)
        # analytic derivatives of the quadratic Lagrange basis at 0.5
        assert np.allclose(em.g[mid], [-1.0, 0.0, 1.0], atol=1e-13)

    def test_against_polynomial_oracle(self):
        basis, em = make_em(5, 7)
        vals, ders = dense_tables(basis.nodes, fe.gauss_legendre_1d(7).points, 1)
        assert np.allclose(em.b, vals, atol=1e-11)
        assert np.allclose(em.g, ders[:, :, 0], atol=1e-9)


class TestGatherScatter:
    def test_multiplicity(self, rng):
        mesh = build_box(3, (2, 2, 2), 1)
        values = rng.standard_normal(mesh.n_nodes)
        evals = fe.e_gather(mesh.restriction, values)
        back = fe.e_scatter_add(mesh.restriction, evals, mesh.n_nodes)
        counts = np.bincount(mesh.restriction.ravel(), minlength=mesh.n_nodes)
        assert np.allclose(back, counts * values, atol=1e-13)
        center = np.nonzero(np.all(np.abs(mesh.coords.T - 0.5) < 1e-14, axis=1))[0][0]
        assert back[center] == pytest.approx(8 * values[center])

    def test_gather_constant(self):
        mesh = build_box(2, (3, 2), 2)
        evals = fe.e_gather(mesh.restriction, np.full(mesh.n_nodes, 4.25))
        assert np.all(evals == 4.25)

    def test_adjoint_identity(self, rng):
        mesh = build_box(3, (2, 3, 2), 2)
        lvec = rng.standard_normal(mesh.n_nodes)
        evec = rng.standard_normal(mesh.restriction.shape)
        lhs = np.vdot(fe.e_gather(mesh.restriction, lvec), evec)
        rhs = np.vdot(lvec, fe.e_scatter_add(mesh.restriction, evec, mesh.n_nodes))
        assert abs(lhs - rhs) <= 1e-13 * max(1.0, abs(lhs))

    def test_gather_broadcasts_components(self, rng):
        mesh = build_box(2, (2, 2), 1)
        lvec = rng.standard_normal((2, mesh.n_nodes))
        evals = fe.e_gather(mesh.restriction, lvec)
        assert evals.shape == (2,) + mesh.restriction.shape
        assert np.array_equal(evals[1], lvec[1][mesh.restriction])


class TestContractions:
    @pytest.mark.parametrize("dim", [2, 3])
    def test_partition_of_unity(self, dim):
        _, em = make_em(2, 4)
        tens = np.full((5,) + (3,) * dim, 2.5)
        out = fe.contract_dofs_to_quad(tens, [em.b] * dim)
        assert out.shape == (5,) + (4,) * dim
        assert np.allclose(out, 2.5, atol=1e-13)

    @pytest.mark.parametrize("dim", [2, 3])
    def test_matches_naive_oracle(self, dim, rng):
        order, n_q = 3, 4
        basis, em = make_em(order, n_q)
        vals, grads = dense_tables(basis.nodes, fe.gauss_legendre_1d(n_q).points, dim)
        tens = rng.standard_normal((2,) + (order + 1,) * dim)
        flat = tens.reshape(2, -1)
        # value interpolation
        got = fe.contract_dofs_to_quad(tens, [em.b] * dim).reshape(2, -1)
        assert np.allclose(got, naive_interp(flat, vals), atol=1e-12)
        # derivative along each direction
        for b in range(dim):
            got = fe.contract_dofs_to_quad(tens, fe.gradient_mats(em, dim, b))
            want = naive_interp(flat, grads[:, :, b])
            assert np.allclose(got.reshape(2, -1), want, atol=1e-12)

    @given(seeds)
    def test_linearity(self, seed):
        rng = np.random.default_rng(seed)
        _, em = make_em(2, 3)
        t1 = rng.standard_normal((2, 3, 3, 3))
        t2 = rng.standard_normal((2, 3, 3, 3))
        a, b = rng.standard_normal(2)
        mats = [em.b, em.g, em.b]
        lhs = fe.contract_dofs_to_quad(a * t1 + b * t2, mats)
        rhs = (a * fe.contract_dofs_to_quad(t1, mats)
               + b * fe.contract_dofs_to_quad(t2, mats))
        scale = np.abs(rhs).max() + 1.0
        assert np.allclose(lhs, rhs, atol=1e-13 * scale)

    @given(seeds)
    def test_adjoint_identity(self, seed):
        rng = np.random.default_rng(seed)
        _, em = make_em(3, 5)
        mats = [em.b, em.g, em.b]
        etens = rng.standard_normal((2, 4, 4, 4))
        qtens = rng.standard_normal((2, 5, 5, 5))
        lhs = np.vdot(fe.contract_dofs_to_quad(etens, mats), qtens)
        rhs = np.vdot(etens, fe.contract_quad_to_dofs(qtens, mats))
        assert abs(lhs - rhs) <= 1e-13 * max(1.0, abs(lhs))

    def test_transpose_zero_and_oracle(self, rng):
        basis, em = make_em(2, 4)
        assert np.count_nonzero(
            fe.contract_quad_to_dofs(np.zeros((1, 4, 4, 4)), [em.b] * 3)) == 0
        vals, _ = dense_tables(basis.nodes, fe.gauss_legendre_1d(4).points, 3)
        qt = rng.standard_normal((2, 4, 4, 4))
        got = fe.contract_quad_to_dofs(qt, [em.b] * 3).reshape(2, -1)
        want = qt.reshape(2, -1) @ vals
        assert np.allclose(got, want, atol=1e-12)

    def test_shape_mismatch(self):
        _, em = make_em(2, 4)
        with pytest.raises(ValueError):
            fe.contract_dofs_to_quad(np.zeros((1, 4, 4)), [em.b, em.b])
        with pytest.raises(ValueError):
            fe.contract_quad_to_dofs(np.zeros((1, 3, 3)), [em.b, em.b])

    def test_operation_counter_accounting(self):
        counter = fe.OpCounter()
        _, em = make_em(2, 4)  # 4x3 matrices
        tens = np.zeros((7, 3, 3, 3))
        fe.contract_dofs_to_quad(tens, [em.b] * 3, counter)
        # per element: 4*3*(3*3) + 4*3*(4*3) + 4*3*(4*4)
        expected = 7 * (4 * 3) * (9 + 12 + 16)
        assert counter.madds == expected
        counter.reset()
        assert counter.madds == 0


class TestJacobians:
    def test_uniform_mesh_diagonal(self):
        mesh = build_box(3, (2, 4, 4), 2)
        _, em = make_em(2, 3)
        jac = fe.jacobians_at_quad(mesh.coords, mesh.restriction, em, 3, 2)
        want = np.diag([1 / 2, 1 / 4, 1 / 4])
        assert np.allclose(jac, want[None, None], atol=1e-13)
        assert np.allclose(det(jac), 1 / 32, atol=1e-14)

    def test_rotated_affine_element(self):
        mesh = build_box(3, (2, 2, 2), 2)
        theta = 0.3
        rot = np.array([[np.cos(theta), -np.sin(theta), 0],
                        [np.sin(theta), np.cos(theta), 0],
                        [0, 0, 1.0]])
        coords = rot @ mesh.coords
        _, em = make_em(2, 3)
        jac = fe.jacobians_at_quad(coords, mesh.restriction, em, 3, 2)
        assert np.allclose(jac, (rot * 0.5)[None, None], atol=1e-13)

    def test_kershaw_element_matches_naive_oracle(self):
        from tmopbench.mesh import MeshSpec, apply_kershaw, build_cartesian
        mesh = apply_kershaw(build_cartesian(MeshSpec(3, 6, 2, 2, order=2)), 0.4, 0.6)
        basis, em = make_em(2, 3)
        jac = fe.jacobians_at_quad(mesh.coords, mesh.restriction, em, 3, 2)
        _, grads = dense_tables(basis.nodes, fe.gauss_legendre_1d(3).points, 3)
        for e in [0, 7, 23]:
            xe = mesh.coords[:, mesh.restriction[e]]
            want = np.einsum("qib,ai->qab", grads, xe)
            assert np.allclose(jac[e], want, atol=1e-12)
