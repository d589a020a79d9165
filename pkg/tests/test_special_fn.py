#!/usr/bin/env python3
"""
Bessel 函数单元测试
"""

import math
import os
import sys
import unittest

import numpy as np
from scipy import special

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core.special_fn import j0, j1, j1_over_z, j2_over_z2


def hankel_asymptotic(nu, z, terms=8):
    """Large-argument expansion J_nu(z) ~ sqrt(2/(pi z)) (P cos w - Q sin w)."""
    def a(k):
        prod = 1.0
        for j in range(1, k + 1):
            prod *= 4 * nu * nu - (2 * j - 1) ** 2
        return prod / (math.factorial(k) * 8.0 ** k)

    P = sum((-1) ** k * a(2 * k) / z ** (2 * k) for k in range(terms))
    Q = sum((-1) ** k * a(2 * k + 1) / z ** (2 * k + 1) for k in range(terms))
    w = z - nu * math.pi / 2 - math.pi / 4
    return math.sqrt(2.0 / (math.pi * z)) * (P * math.cos(w) - Q * math.sin(w))


class TestBessel(unittest.TestCase):
    """
    J0/J1 及其商函数测试类
    """

    def test_values_at_zero(self):
        self.assertEqual(j0(0.0), 1.0)
        self.assertEqual(j1(0.0), 0.0)
        self.assertEqual(j1_over_z(0.0), 0.5)
        self.assertEqual(j2_over_z2(0.0), 0.125)

    def test_known_values(self):
        # first zero of J0 and the value J1(1)
        self.assertAlmostEqual(j0(2.404825557695773), 0.0, places=14)
        self.assertAlmostEqual(j1(1.0), 0.44005058574493355, places=15)

    def test_large_argument(self):
        for z in (200.0, 500.0, 1000.0):
            self.assertAlmostEqual(j0(z), hankel_asymptotic(0, z), places=13)
            self.assertAlmostEqual(j1(z), hankel_asymptotic(1, z), places=13)

    def test_quotients_match_definitions(self):
        z = np.array([0.6, 1.0, 3.7, 10.0, 45.0, 150.0])
        np.testing.assert_allclose(j1_over_z(z), special.j1(z) / z, rtol=1e-14)
        np.testing.assert_allclose(j2_over_z2(z), special.jv(2, z) / z ** 2, rtol=1e-10, atol=1e-16)

    def test_series_branch(self):
        z = np.array([1e-8, 1e-4, 5e-4, 0.1, 0.3, 0.45])
        np.testing.assert_allclose(j1_over_z(z), special.jv(1, z) / z, rtol=1e-14)
        np.testing.assert_allclose(j2_over_z2(z), special.jv(2, z) / z ** 2, rtol=1e-12)

    def test_both_branches_at_cutoffs(self):
        for f, nu, cut in ((j1_over_z, 1, 1e-3), (j2_over_z2, 2, 0.5)):
            for z in (cut * (1 - 1e-9), cut * (1 + 1e-9)):
                self.assertAlmostEqual(f(z) / (special.jv(nu, z) / z ** nu), 1.0, delta=1e-13)

    def test_derivative_of_j0(self):
        # d/dz j0 = -j1 by central differences
        z = np.random.default_rng(4).uniform(0.0, 100.0, 50)
        step = 1e-6
        fd = (j0(z + step) - j0(z - step)) / (2 * step)
        np.testing.assert_allclose(fd, -j1(z), atol=1e-6)

    def test_scalar_and_array_shapes(self):
        self.assertIsInstance(j1_over_z(1.0), float)
        self.assertEqual(j2_over_z2(np.zeros((2, 3))).shape, (2, 3))


if __name__ == '__main__':
    unittest.main()
