import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ou_inverse import HurwitzViolation, OUModel
from ou_inverse.matops import (analyticity_angle, angle_exponents, eigenvalues, expm,
                               gramian_qinf, gramian_qt, is_hurwitz, lyapunov_residual,
                               spectral_abscissa)
from ou_inverse.quadrature import adaptive_simpson

from conftest import random_hurwitz, random_spd

entries = st.floats(-3, 3, allow_nan=False)
mat2 = st.lists(entries, min_size=4, max_size=4).map(lambda v: np.array(v).reshape(2, 2))


class TestModel:
    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            OUModel([[1, 2], [0, 1]], -np.eye(2))
        with pytest.raises(ValueError):
            OUModel(-1.0, -1.0)
        with pytest.raises(ValueError):
            OUModel(1.0, 0.0)
        with pytest.raises(ValueError):
            OUModel(1.0, -1.0, s=0.0)

    def test_arrays_are_frozen(self):
        m = OUModel(np.eye(2), -np.eye(2))
        with pytest.raises(ValueError):
            m.Q[0, 0] = 5.0


class TestExpm:
    def test_zero_time_is_identity(self):
        B = np.array([[0.3, -2.0], [1.5, 0.7]])
        assert np.array_equal(expm(B, 0.0), np.eye(2))

    def test_rotation(self):
        B = np.array([[0.0, 1.0], [-1.0, 0.0]])
        np.testing.assert_allclose(expm(B, math.pi / 2), [[0, 1], [-1, 0]], atol=1e-15)

    def test_scalar(self):
        assert expm(np.array([[-1.0]]), 2.0)[0, 0] == pytest.approx(math.exp(-2), rel=1e-15)

    @given(mat2, st.floats(-1, 1), st.floats(-1, 1))
    def test_group_law(self, B, t, u):
        lhs = expm(B, t) @ expm(B, u)
        rhs = expm(B, t + u)
        assert np.abs(lhs - rhs).max() <= 1e-11 * max(1.0, np.abs(rhs).max())

    @given(mat2, st.floats(-1.5, 1.5))
    def test_matches_scipy(self, B, t):
        import scipy.linalg
        ref = scipy.linalg.expm(t * B)
        assert np.abs(expm(B, t) - ref).max() <= 1e-12 * max(1.0, np.abs(ref).max())

    def test_near_defective_branch(self):
        B = np.array([[-1.0, 1.0], [1e-12, -1.0]])
        import scipy.linalg
        np.testing.assert_allclose(expm(B, 0.7), scipy.linalg.expm(0.7 * B), rtol=1e-13)


class TestHurwitz:
    @pytest.mark.parametrize("B, expected", [
        (-np.eye(2), True),
        ([[0, 1], [-1, 0]], False),
        ([[-1, 10], [0, -1]], True),
    ])
    def test_examples(self, B, expected):
        assert is_hurwitz(np.array(B, dtype=float)) is expected

    def test_eigenvalues_closed_form(self):
        B = np.array([[1.0, 2.0], [-3.0, 0.5]])
        got = np.sort_complex(eigenvalues(B))
        np.testing.assert_allclose(got, np.sort_complex(np.linalg.eigvals(B)), atol=1e-14)
        assert spectral_abscissa(B) == pytest.approx(0.75)


class TestGramians:
    def test_qt_zero(self):
        m = OUModel(np.eye(2), -np.eye(2))
        assert np.array_equal(gramian_qt(m, 0.0), np.zeros((2, 2)))

    def test_qt_scalar(self, scalar_model):
        assert gramian_qt(scalar_model, 1.0)[0, 0] == pytest.approx((1 - math.exp(-2)) / 2,
                                                                  abs=1e-12)

    def test_qt_converges_to_qinf(self, rng):
        for _ in range(10):
            m = OUModel(random_spd(rng), random_hurwitz(rng))
            t = 30.0 / abs(spectral_abscissa(m.B))
            np.testing.assert_allclose(gramian_qt(m, t), gramian_qinf(m), atol=1e-8)

    def test_qt_semigroup_decomposition(self, rng):
        for _ in range(10):
            m = OUModel(random_spd(rng), rng.uniform(-2, 2, (2, 2)))
            t1, t2 = rng.uniform(0, 1.5, 2)
            E = expm(m.B, t1)
            rhs = gramian_qt(m, t1) + E @ gramian_qt(m, t2) @ E.T
            np.testing.assert_allclose(gramian_qt(m, t1 + t2), rhs, atol=1e-9, rtol=1e-9)

    def test_qinf_examples(self):
        np.testing.assert_allclose(gramian_qinf(OUModel(np.eye(2), -np.eye(2))), 0.5 * np.eye(2))
        b = -2.5
        assert gramian_qinf(OUModel(1.0, b))[0, 0] == pytest.approx(-1 / (2 * b))
        with pytest.raises(HurwitzViolation):
            gramian_qinf(OUModel(np.eye(2), [[0, 1], [-1, 0]]))

    def test_qinf_against_quadrature(self):
        # independent oracle: integrate the defining integral to a long horizon
        m = OUModel(np.eye(2), [[-1, 1], [0, -1]])
        f = lambda tau: expm(m.B, tau) @ expm(m.B, tau).T
        oracle = adaptive_simpson(f, 0.0, 50.0, tol=1e-13)
        np.testing.assert_allclose(gramian_qinf(m), oracle, atol=1e-11)


class TestAngle:
    def test_identity_model(self):
        rep = analyticity_angle(OUModel(np.eye(2), -np.eye(2)))
        assert rep.psi == math.pi / 2
        assert (rep.r, rep.phi, rep.c_psi) == (1.0, 1.0, 1.0)

    def test_diagonal_model(self):
        rep = analyticity_angle(OUModel(np.eye(2), np.diag([-1.0, -2.0])))
        assert rep.psi == pytest.approx(math.pi / 2, abs=1e-12)

    def test_non_normal_model(self):
        m = OUModel(np.eye(2), [[-1, 1], [0, -1]])
        rep = analyticity_angle(m)
        # oracle: quadrature Q_inf and an eigen-decomposition spectral norm
        q = adaptive_simpson(lambda tau: expm(m.B, tau) @ expm(m.B, tau).T, 0.0, 50.0, tol=1e-13)
        M = 0.5 * np.eye(2) + q @ m.B.T
        cot = 2 * math.sqrt(np.linalg.eigvalsh(M.T @ M).max())
        assert rep.psi == pytest.approx(math.atan2(1.0, cot), abs=1e-10)
        assert rep.psi < math.pi / 2
        assert rep.r == pytest.approx(2 * math.cos(rep.psi / 2))
        assert rep.phi == pytest.approx(math.pi / rep.psi)

    def test_non_hurwitz_refused(self):
        with pytest.raises(HurwitzViolation):
            analyticity_angle(OUModel(1.0, 0.5))

    def test_exponents_identity(self):
        for psi in np.linspace(0.1, math.pi / 2, 17):
            r, phi, c = angle_exponents(psi)
            assert c == (1.0 / r) ** phi

    def test_random_models_invariants(self, rng):
        for _ in range(200):
            m = OUModel(random_spd(rng), random_hurwitz(rng))
            rep = m.angle
            assert lyapunov_residual(m.B, rep.q_inf, m.Q) <= 1e-10
            assert 0 < rep.psi <= math.pi / 2
            assert rep.r >= 1 and rep.phi >= 1 and 0 < rep.c_psi <= 1
            assert rep.c_psi == (1.0 / rep.r) ** rep.phi
