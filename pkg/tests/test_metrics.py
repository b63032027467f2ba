import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import (fd_gradient_matrix, fd_hessian_matrix, random_rotation,
                     random_valid_matrix)
from tmopbench import fe
from tmopbench.mesh import MeshSpec, apply_kershaw, build_box, build_cartesian
from tmopbench.metrics import (MetricId, TargetKind, TargetSpec, build_targets,
                               evaluate, metric_first_derivative,
                               metric_second_derivative, metric_value)

seeds = st.integers(min_value=0, max_value=2**31 - 1)

ALL_CASES = [(MetricId.MU_2, 2), (MetricId.MU_55, 2),
             (MetricId.MU_55, 3), (MetricId.MU_303, 3)]


class TestValues:
    def test_mu303_identity_is_ideal(self):
        assert metric_value(MetricId.MU_303, np.eye(3)) == pytest.approx(0.0, abs=1e-15)

    def test_mu303_closed_form(self):
        t = np.diag([2.0, 1.0, 1.0])
        assert metric_value(MetricId.MU_303, t) == pytest.approx(2 ** (1 / 3) - 1,
                                                                 abs=1e-14)

    def test_mu2_closed_form(self):
        assert metric_value(MetricId.MU_2, np.diag([2.0, 1.0])) == pytest.approx(
            0.25, abs=1e-15)

    def test_mu55_zero_at_unit_volume(self):
        shear = np.array([[1.0, 0.7, 0.0], [0.0, 1.0, -0.3], [0.0, 0.0, 1.0]])
        assert metric_value(MetricId.MU_55, shear) == pytest.approx(0.0, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            metric_value(MetricId.MU_2, np.eye(3))
        with pytest.raises(ValueError):
            metric_value(MetricId.MU_303, np.eye(2))

    def test_nonpositive_determinant_rejected(self):
        with pytest.raises(ValueError):
            metric_value(MetricId.MU_303, np.diag([1.0, -1.0, 1.0]))
        with pytest.raises(ValueError):
            metric_first_derivative(MetricId.MU_55, np.zeros((2, 2)))

    @given(seeds, st.sampled_from(ALL_CASES))
    def test_nonnegative(self, seed, case):
        metric, dim = case
        t = random_valid_matrix(dim, np.random.default_rng(seed))
        assert metric_value(metric, t) >= 0.0

    @given(seeds, st.floats(min_value=0.05, max_value=20.0))
    def test_shape_metrics_scale_invariant(self, seed, c):
        rng = np.random.default_rng(seed)
        t2 = random_valid_matrix(2, rng)
        assert metric_value(MetricId.MU_2, c * t2) == pytest.approx(
            metric_value(MetricId.MU_2, t2), rel=1e-12, abs=1e-12)
        t3 = random_valid_matrix(3, rng)
        assert metric_value(MetricId.MU_303, c * t3) == pytest.approx(
            metric_value(MetricId.MU_303, t3), rel=1e-12, abs=1e-12)

    @given(seeds, st.sampled_from(ALL_CASES))
    def test_rotation_invariant(self, seed, case):
        metric, dim = case
        rng = np.random.default_rng(seed)
        t = random_valid_matrix(dim, rng)
        rot = random_rotation(dim, rng)
        assert metric_value(metric, rot @ t) == pytest.approx(
            metric_value(metric, t), rel=1e-12, abs=1e-12)

    def test_batched_matches_single(self, rng):
        ts = np.stack([random_valid_matrix(3, rng) for _ in range(6)]).reshape(2, 3, 3, 3)
        batched = metric_value(MetricId.MU_303, ts)
        for i in range(2):
            for j in range(3):
                assert batched[i, j] == metric_value(MetricId.MU_303, ts[i, j])


class TestFirstDerivative:
    def test_zero_at_shape_minimum(self):
        d = metric_first_derivative(MetricId.MU_303, np.eye(3))
        assert np.allclose(d, 0.0, atol=1e-15)

    def test_zero_at_unit_volume_for_size_metric(self):
        shear = np.array([[1.0, 0.4], [0.0, 1.0]])
        d = metric_first_derivative(MetricId.MU_55, shear)
        assert np.allclose(d, 0.0, atol=1e-15)

    def test_fd_at_stretched_matrix(self):
        t = np.diag([2.0, 1.0, 1.0])
        got = metric_first_derivative(MetricId.MU_303, t)
        want = fd_gradient_matrix(lambda m: metric_value(MetricId.MU_303, m), t, 1e-6)
        assert np.allclose(got, want, rtol=1e-6, atol=1e-9)

    @pytest.mark.parametrize("metric,dim", ALL_CASES)
    def test_fd_sweep(self, metric, dim, rng):
        for _ in range(25):
            t = random_valid_matrix(dim, rng)
            got = metric_first_derivative(metric, t)
            want = fd_gradient_matrix(lambda m: metric_value(metric, m), t, 1e-6)
            scale = np.abs(want).max() + 1e-3
            assert np.allclose(got, want, atol=1e-6 * scale)


class TestSecondDerivative:
    @given(seeds, st.sampled_from(ALL_CASES))
    def test_pair_swap_symmetry(self, seed, case):
        metric, dim = case
        t = random_valid_matrix(dim, np.random.default_rng(seed))
        h = metric_second_derivative(metric, t)
        assert np.abs(h - h.T).max() <= 1e-12 * (np.abs(h).max() + 1.0)

    def test_fd_mu55_at_identity(self):
        got = metric_second_derivative(MetricId.MU_55, np.eye(3))
        want = fd_hessian_matrix(
            lambda m: metric_first_derivative(MetricId.MU_55, m), np.eye(3), 1e-5)
        assert np.allclose(got, want, atol=1e-5 * (np.abs(want).max() + 1.0))

    def test_fd_mu2_stretched(self):
        t = np.diag([2.0, 1.0])
        got = metric_second_derivative(MetricId.MU_2, t)
        want = fd_hessian_matrix(
            lambda m: metric_first_derivative(MetricId.MU_2, m), t, 1e-5)
        assert np.allclose(got, want, atol=1e-5 * (np.abs(want).max() + 1.0))

    @pytest.mark.parametrize("metric,dim", ALL_CASES)
    def test_fd_sweep(self, metric, dim, rng):
        for _ in range(25):
            t = random_valid_matrix(dim, rng)
            got = metric_second_derivative(metric, t)
            want = fd_hessian_matrix(
                lambda m: metric_first_derivative(metric, m), t, 1e-5)
            scale = np.abs(want).max() + 1e-3
            assert np.allclose(got, want, atol=1e-5 * scale)

    def test_evaluate_bundle(self):
        t = np.diag([2.0, 1.0, 1.0])
        ev = evaluate(MetricId.MU_303, t)
        assert ev.value == pytest.approx(2 ** (1 / 3) - 1)
        assert ev.first.shape == (3, 3)
        assert ev.second.shape == (9, 9)


class TestTargets:
    def test_ideal_unit(self):
        mesh = build_box(3, (2, 2, 2), 1)
        td = build_targets(mesh, TargetSpec(TargetKind.IDEAL_UNIT),
                           fe.gauss_legendre_1d(2))
        assert td.det_w == 1.0
        assert np.allclose(td.w_matrix() @ td.w_inv_matrix(), np.eye(3), atol=1e-13)

    def test_equal_size_unit_cube(self):
        mesh = build_box(3, (2, 2, 2), 1)
        td = build_targets(mesh, TargetSpec(TargetKind.IDEAL_EQUAL_SIZE),
                           fe.gauss_legendre_1d(2))
        assert td.scale == pytest.approx(0.5, abs=1e-13)
        assert td.det_w == pytest.approx(0.125, abs=1e-13)

    @pytest.mark.parametrize("order", [1, 2])
    def test_equal_size_on_kershaw_mesh(self, order):
        # the deformation preserves volume, so h matches the uniform value
        mesh = apply_kershaw(build_cartesian(MeshSpec(3, 6, 2, 2, order=order)),
                             0.3, 0.3)
        td = build_targets(mesh, TargetSpec(TargetKind.IDEAL_EQUAL_SIZE),
                           fe.gauss_legendre_1d(order + 2))
        uniform_h = (1.0 / mesh.n_elements) ** (1 / 3)
        assert abs(td.scale - uniform_h) <= 1e-10

    def test_explicit_h(self):
        mesh = build_box(2, (2, 2), 1)
        td = build_targets(mesh, TargetSpec(TargetKind.IDEAL_EQUAL_SIZE, h=0.25),
                           fe.gauss_legendre_1d(2))
        assert td.scale == 0.25
        with pytest.raises(ValueError):
            build_targets(mesh, TargetSpec(TargetKind.IDEAL_EQUAL_SIZE, h=-1.0),
                          fe.gauss_legendre_1d(2))
