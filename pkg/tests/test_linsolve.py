#!/usr/bin/env python3
"""
稀疏线性求解单元测试
"""

import os
import sys
import unittest
from unittest.mock import patch

import numpy as np
from scipy import sparse

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core.config import ConfigError, SolverOptions
from src.core.linsolve import ConvergenceError, SingularMatrixError, relative_residual, solve


def dominant_system(n=100, seed=0):
    rng = np.random.default_rng(seed)
    A = sparse.random(n, n, density=0.05, random_state=seed, format='csr')
    A = A + 1j * sparse.random(n, n, density=0.05, random_state=seed + 1, format='csr')
    A = A + sparse.diags(np.full(n, 10.0 + 2.0j))
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return A.tocsr(), b


class TestDirectSolve(unittest.TestCase):
    """
    LU 直接求解测试类
    """

    def test_identity(self):
        b = np.arange(5) + 1j
        report = solve(sparse.identity(5, format='csr'), b)
        np.testing.assert_allclose(report.x, b)
        self.assertTrue(report.converged)
        self.assertEqual(report.method, "lu")

    def test_small_complex_system(self):
        A = sparse.csr_matrix(np.array([[2.0, 1j], [1j, 2.0]]))
        report = solve(A, [1.0, 0.0])
        np.testing.assert_allclose(report.x, [0.4, -0.2j], atol=1e-15)
        self.assertLess(report.residual, 1e-15)

    def test_random_dominant_system(self):
        A, b = dominant_system()
        report = solve(A, b)
        self.assertLess(relative_residual(A, report.x, b), 1e-12)
        self.assertIn("nnz_L", report.stats)
        self.assertGreaterEqual(report.wall_time, 0.0)

    def test_empty_row_is_singular(self):
        A = sparse.lil_matrix((4, 4), dtype=complex)
        for i in (0, 1, 3):
            A[i, i] = 1.0
        with self.assertRaises(SingularMatrixError) as ctx:
            solve(A.tocsr(), np.ones(4))
        self.assertEqual(ctx.exception.pivot, 2)

    def test_real_matrix_complex_rhs(self):
        b = np.array([1 + 2j, 3.0, -1j])
        report = solve(sparse.identity(3, format='csr'), b)
        np.testing.assert_array_equal(report.x, b)

    def test_numerically_singular(self):
        A = sparse.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
        with self.assertRaises(SingularMatrixError) as ctx:
            solve(A, np.ones(2))
        self.assertIsNotNone(ctx.exception.pivot)
        self.assertIn(ctx.exception.pivot, (0, 1))

    def test_singular_pivot_in_dependent_block(self):
        # columns 1 and 2 coincide
        A = sparse.csr_matrix(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0], [0.0, 1.0, 1.0]]))
        with self.assertRaises(SingularMatrixError) as ctx:
            solve(A, np.ones(3))
        self.assertIn(ctx.exception.pivot, (1, 2))

    def test_dimension_mismatch(self):
        with self.assertRaises(ValueError):
            solve(sparse.identity(3, format='csr'), np.ones(4))
        with self.assertRaises(ValueError):
            solve(sparse.csr_matrix(np.ones((2, 3))), np.ones(2))

    def test_residual_gate(self):
        A, b = dominant_system(seed=3)
        report = solve(A, b, SolverOptions(residual_gate=1e-30))
        self.assertFalse(report.converged)
        self.assertTrue(np.all(np.isfinite(report.x)))

    def test_invalid_options(self):
        with self.assertRaises(ConfigError):
            solve(sparse.identity(2, format='csr'), np.ones(2), SolverOptions(method="cg"))


class TestIterativeSolve(unittest.TestCase):
    """
    GMRES 迭代求解测试类
    """

    def test_gmres_matches_lu(self):
        A, b = dominant_system(seed=5)
        direct = solve(A, b)
        iterative = solve(A, b, SolverOptions(method="gmres", tol=1e-12))
        np.testing.assert_allclose(iterative.x, direct.x, rtol=1e-9, atol=1e-12)
        self.assertEqual(iterative.iterations, len(iterative.residual_history))
        self.assertIn("ilu_nnz", iterative.stats)

    def test_gmres_real_matrix(self):
        b = np.array([1 + 2j, 3.0, -1j])
        report = solve(sparse.identity(3, format='csr'), b, SolverOptions(method="gmres"))
        np.testing.assert_allclose(report.x, b, atol=1e-12)

    def test_gmres_not_converged(self):
        A, b = dominant_system(seed=6)
        options = SolverOptions(method="gmres", restart=5, max_iterations=10)
        with patch('src.core.linsolve.spla.gmres', return_value=(np.zeros(len(b), dtype=complex), 10)):
            with self.assertRaises(ConvergenceError) as ctx:
                solve(A, b, options)
        self.assertIsInstance(ctx.exception.residual_history, list)


if __name__ == '__main__':
    unittest.main()
