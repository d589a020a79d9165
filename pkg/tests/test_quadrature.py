#!/usr/bin/env python3
"""
数值积分规则单元测试
"""

import math
import os
import sys
import unittest

import numpy as np

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core.quadrature import MAX_DEGREE, QuadratureError, interval_rule, tet_rule, tri_rule


def simplex_monomial(exponents):
    """int over the unit simplex of prod x_i^a_i = prod a_i! / (sum a_i + dim)!"""
    num = np.prod([math.factorial(a) for a in exponents])
    return num / math.factorial(sum(exponents) + len(exponents))


class TestQuadrature(unittest.TestCase):
    """
    积分规则精度测试类
    """

    def test_weights_sum_to_measure(self):
        for degree in (0, 1, 5, 12):
            self.assertAlmostEqual(interval_rule(degree).weights.sum(), 1.0, places=14)
            self.assertAlmostEqual(tri_rule(degree).weights.sum(), 0.5, places=14)
            self.assertAlmostEqual(tet_rule(degree).weights.sum(), 1.0 / 6.0, places=14)

    def test_interval_exactness(self):
        for degree in range(0, 12):
            rule = interval_rule(degree)
            for k in range(degree + 1):
                self.assertAlmostEqual(rule.integrate(rule.points[:, 0] ** k), 1.0 / (k + 1), places=13)

    def test_triangle_exactness(self):
        for degree in (1, 2, 4, 7, 10):
            rule = tri_rule(degree)
            x, y = rule.points.T
            for a in range(degree + 1):
                for b in range(degree + 1 - a):
                    self.assertAlmostEqual(rule.integrate(x ** a * y ** b), simplex_monomial((a, b)), places=14)

    def test_tetrahedron_exactness(self):
        for degree in (1, 2, 3, 6, 9):
            rule = tet_rule(degree)
            x, y, z = rule.points.T
            for a in range(degree + 1):
                for b in range(degree + 1 - a):
                    for c in range(degree + 1 - a - b):
                        self.assertAlmostEqual(rule.integrate(x ** a * y ** b * z ** c),
                                               simplex_monomial((a, b, c)), places=14)

    def test_known_tetrahedron_values(self):
        rule = tet_rule(4)
        x, y, z = rule.points.T
        self.assertAlmostEqual(rule.integrate(x ** 2 * y), 1.0 / 360.0, places=15)
        self.assertAlmostEqual(rule.integrate(x ** 2 * y ** 2), 1.0 / 1260.0, places=15)

    def test_high_degree(self):
        rule = tet_rule(40)
        x = rule.points[:, 0]
        self.assertAlmostEqual(rule.integrate(x ** 40), simplex_monomial((40, 0, 0)), delta=1e-17)
        self.assertTrue(np.all(rule.weights > 0))

    def test_points_inside(self):
        rule = tet_rule(8)
        self.assertTrue(np.all(rule.points >= 0))
        self.assertTrue(np.all(rule.points.sum(axis=1) <= 1 + 1e-15))
        tri = tri_rule(8)
        self.assertTrue(np.all(tri.points.sum(axis=1) <= 1 + 1e-15))

    def test_vector_integrand(self):
        rule = tri_rule(3)
        values = np.stack([np.ones(len(rule)), rule.points[:, 0]], axis=1)
        np.testing.assert_allclose(rule.integrate(values), [0.5, 1.0 / 6.0], rtol=1e-14)

    def test_invalid_degree(self):
        with self.assertRaises(QuadratureError) as ctx:
            tet_rule(MAX_DEGREE + 1)
        self.assertIn(str(MAX_DEGREE), str(ctx.exception))
        with self.assertRaises(QuadratureError):
            tri_rule(-1)
        with self.assertRaises(QuadratureError):
            interval_rule(2.5)

    def test_rules_cached_and_readonly(self):
        self.assertIs(tet_rule(5), tet_rule(5))
        with self.assertRaises(ValueError):
            tet_rule(5).weights[0] = 1.0


if __name__ == '__main__':
    unittest.main()
