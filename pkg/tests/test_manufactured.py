#!/usr/bin/env python3
"""
精确解与数据 f, g 单元测试
"""

import os
import sys
import unittest

import numpy as np
from scipy import special

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core.manufactured import BesselSolution, PolynomialSolution, ProblemParams


def fd_curl(field, points, step):
    D = np.empty((len(points), 3, 3), dtype=complex)
    for d in range(3):
        shift = np.zeros(3)
        shift[d] = step
        D[:, :, d] = (field(points + shift) - field(points - shift)) / (2.0 * step)
    return np.stack([D[:, 2, 1] - D[:, 1, 2], D[:, 0, 2] - D[:, 2, 0], D[:, 1, 0] - D[:, 0, 1]], axis=1)


def bessel_field(kappa, x):
    """The Bessel test field written out directly with scipy."""
    J = special.j0(kappa * np.linalg.norm(x))
    return np.array([np.sin(kappa * x[1]) * J, np.cos(kappa * x[2]) * J, 1j * kappa * J])


def fd_load(kappa, x, step=1e-4):
    """f = grad div E - Laplace E - kappa^2 E from second central differences of E."""
    H = np.empty((3, 3, 3), dtype=complex)
    unit = np.eye(3) * step
    for d in range(3):
        for e in range(3):
            H[:, d, e] = (bessel_field(kappa, x + unit[d] + unit[e]) - bessel_field(kappa, x + unit[d] - unit[e])
                          - bessel_field(kappa, x - unit[d] + unit[e])
                          + bessel_field(kappa, x - unit[d] - unit[e])) / (4.0 * step * step)
    grad_div = np.einsum('cci->i', H)
    laplace = np.einsum('cdd->c', H)
    return grad_div - laplace - kappa ** 2 * bessel_field(kappa, x)


class TestProblemParams(unittest.TestCase):

    def test_validation(self):
        self.assertEqual(ProblemParams(3.0).lam, 1.0)
        for kappa in (0.0, -1.0, float('inf')):
            with self.assertRaises(ValueError):
                ProblemParams(kappa)
        with self.assertRaises(ValueError):
            ProblemParams(1.0, lam=0.0)


class TestBesselSolution(unittest.TestCase):
    """
    Bessel 制造解测试类
    """

    def setUp(self):
        self.rng = np.random.default_rng(11)
        self.points = self.rng.random((200, 3))

    def test_value_at_origin(self):
        exact = BesselSolution(ProblemParams(5.0))
        np.testing.assert_allclose(exact.eval_E(np.zeros(3)), [0.0, 1.0, 5.0j])
        for evaluator in (exact.eval_curlE, exact.eval_curlcurlE, exact.eval_f):
            self.assertTrue(np.all(np.isfinite(evaluator(np.zeros(3)))))

    def test_vanishes_where_kappa_r_is_first_zero(self):
        kappa = 5.0
        x = np.array([1.0, 2.0, 2.0]) / 3.0 * 2.404825557695773 / kappa
        np.testing.assert_allclose(BesselSolution(ProblemParams(kappa)).eval_E(x), 0.0, atol=1e-13)

    def test_load_at_cube_centre(self):
        x = np.array([0.5, 0.5, 0.5])
        f = BesselSolution(ProblemParams(5.0)).eval_f(x)
        expected = fd_load(5.0, x)
        self.assertLess(np.abs(f - expected).max(), 1e-6 * np.abs(expected).max())
        np.testing.assert_allclose(BesselSolution(ProblemParams(5.0)).eval_E(x), bessel_field(5.0, x), rtol=1e-14)

    def test_curl_against_finite_differences(self):
        for kappa in (5.0, 50.0):
            exact = BesselSolution(ProblemParams(kappa))
            curl = exact.eval_curlE(self.points)
            fd = fd_curl(exact.eval_E, self.points, 1e-5)
            self.assertLess(np.abs(fd - curl).max() / np.abs(curl).max(), 1e-5)

    def test_load_against_finite_differences(self):
        for kappa in (5.0, 50.0):
            exact = BesselSolution(ProblemParams(kappa))
            f = exact.eval_f(self.points)
            fd = fd_curl(exact.eval_curlE, self.points, 1e-4) - kappa ** 2 * exact.eval_E(self.points)
            self.assertLess(np.abs(fd - f).max() / np.abs(f).max(), 1e-3)

    def test_fields_consistent(self):
        exact = BesselSolution(ProblemParams(7.0))
        E, curl = exact.eval_fields(self.points)
        np.testing.assert_array_equal(E, exact.eval_E(self.points))
        np.testing.assert_array_equal(curl, exact.eval_curlE(self.points))

    def test_impedance_data_tangential(self):
        exact = BesselSolution(ProblemParams(6.0, lam=2.0))
        points = self.points.copy()
        points[:, 0] = 1.0
        g = exact.eval_g(points, [1.0, 0.0, 0.0])
        np.testing.assert_allclose(g[:, 0], 0.0, atol=1e-12)
        # g = curl E x nu - i kappa lambda E_T
        E, curl = exact.eval_fields(points)
        expected_y = curl[:, 2] * 1.0 - 1j * 6.0 * 2.0 * E[:, 1]
        np.testing.assert_allclose(g[:, 1], expected_y, rtol=1e-13)


class TestPolynomialSolution(unittest.TestCase):
    """
    多项式制造解测试类
    """

    def test_linear_field(self):
        params = ProblemParams(2.0)
        # E = (y, z, x)
        exact = PolynomialSolution.from_terms(params, {(0, (0, 1, 0)): 1.0, (1, (0, 0, 1)): 1.0,
                                                       (2, (1, 0, 0)): 1.0})
        x = np.array([[0.3, 0.5, 0.7]])
        np.testing.assert_allclose(exact.eval_E(x), [[0.5, 0.7, 0.3]])
        np.testing.assert_allclose(exact.eval_curlE(x), [[-1.0, -1.0, -1.0]])
        np.testing.assert_allclose(exact.eval_curlcurlE(x), [[0.0, 0.0, 0.0]])
        np.testing.assert_allclose(exact.eval_f(x), -4.0 * exact.eval_E(x))
        self.assertEqual(exact.degree, 1)

    def test_constant_field(self):
        params = ProblemParams(3.0, lam=0.5)
        exact = PolynomialSolution.constant(params, [1.0, 2.0, 3.0])
        x = np.random.default_rng(0).random((10, 3))
        np.testing.assert_allclose(exact.eval_curlE(x), 0.0)
        np.testing.assert_allclose(exact.eval_f(x), -9.0 * exact.eval_E(x))
        g = exact.eval_g(x, [0.0, 0.0, -1.0])
        np.testing.assert_allclose(g, -1j * 1.5 * np.array([[1.0, 2.0, 0.0]] * 10))

    def test_quadratic_curlcurl(self):
        # E = (y^2, 0, 0): curl = (0, 0, -2y), curl curl = (-2, 0, 0)
        exact = PolynomialSolution.from_terms(ProblemParams(1.0), {(0, (0, 2, 0)): 1.0})
        x = np.array([[0.1, 0.4, 0.9]])
        np.testing.assert_allclose(exact.eval_curlE(x), [[0.0, 0.0, -0.8]])
        np.testing.assert_allclose(exact.eval_curlcurlE(x), [[-2.0, 0.0, 0.0]])

    def test_random_curl_against_finite_differences(self):
        rng = np.random.default_rng(4)
        exact = PolynomialSolution.random(ProblemParams(2.0), 3, rng)
        pts = rng.random((30, 3))
        np.testing.assert_allclose(fd_curl(exact.eval_E, pts, 1e-5), exact.eval_curlE(pts), atol=1e-7)
        np.testing.assert_allclose(fd_curl(exact.eval_curlE, pts, 1e-5), exact.eval_curlcurlE(pts), atol=1e-6)

    def test_scaled(self):
        exact = PolynomialSolution.random(ProblemParams(2.0), 2, np.random.default_rng(1))
        x = np.random.default_rng(2).random((5, 3))
        np.testing.assert_allclose(exact.scaled(2j).eval_f(x), 2j * exact.eval_f(x))


if __name__ == '__main__':
    unittest.main()
