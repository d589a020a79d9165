"""
Gauss quadrature on the unit interval, the reference triangle and the
reference tetrahedron.

Triangle and tetrahedron rules are tensor Gauss-Legendre rules pushed
through collapsed (Duffy) coordinates, so every degree up to MAX_DEGREE is
available and all weights are positive.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

logger = logging.getLogger(__name__)

MAX_DEGREE = 100


class QuadratureError(ValueError):
    """Raised when a rule of the requested degree is not available."""


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return len(self.weights)

    def integrate(self, values):
        """Apply the rule to function values sampled at `points` (first axis)."""
        return np.tensordot(self.weights, values, axes=(0, 0))


def _check_degree(degree):
    if int(degree) != degree or degree < 0:
        raise QuadratureError(f"积分阶数必须是非负整数: {degree}")
    if degree > MAX_DEGREE:
        raise QuadratureError(f"积分阶数 {degree} 超出支持范围，最大为 {MAX_DEGREE}")
    return int(degree)


def _gauss_01(n):
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _frozen(points, weights, degree):
    points = np.ascontiguousarray(points, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points, weights, degree)


@lru_cache(maxsize=None)
def interval_rule(degree):
    """
    Gauss-Legendre rule on [0, 1].

    Args:
        degree: Polynomial degree integrated exactly

    Returns:
        QuadratureRule: points of shape (n, 1), weights summing to 1
    """
    degree = _check_degree(degree)
    x, w = _gauss_01(degree // 2 + 1)
    return _frozen(x[:, None], w, degree)


@lru_cache(maxsize=None)
def tri_rule(degree):
    """
    Collapsed Gauss rule on the triangle (0,0), (1,0), (0,1).

    x = u, y = (1-u) v with Jacobian (1-u); the u direction carries one
    extra degree from the Jacobian.
    """
    degree = _check_degree(degree)
    u, wu = _gauss_01((degree + 1) // 2 + 1)
    v, wv = _gauss_01(degree // 2 + 1)
    U, V = np.meshgrid(u, v, indexing='ij')
    W = np.outer(wu, wv) * (1.0 - U)
    points = np.stack([U, (1.0 - U) * V], axis=-1).reshape(-1, 2)
    return _frozen(points, W.ravel(), degree)


@lru_cache(maxsize=None)
def tet_rule(degree):
    """
    Collapsed Gauss rule on the tetrahedron (0,0,0), (1,0,0), (0,1,0), (0,0,1).

    x = u, y = (1-u) v, z = (1-u)(1-v) w with Jacobian (1-u)^2 (1-v).
    """
    degree = _check_degree(degree)
    u, wu = _gauss_01((degree + 2) // 2 + 1)
    v, wv = _gauss_01((degree + 1) // 2 + 1)
    s, ws = _gauss_01(degree // 2 + 1)
    U, V, S = np.meshgrid(u, v, s, indexing='ij')
    W = (wu[:, None, None] * wv[None, :, None] * ws[None, None, :]) * (1.0 - U) ** 2 * (1.0 - V)
    points = np.stack([U, (1.0 - U) * V, (1.0 - U) * (1.0 - V) * S], axis=-1).reshape(-1, 3)
    logger.debug(f"四面体积分规则: degree={degree}, {len(W.ravel())} 个积分点")
    return _frozen(points, W.ravel(), degree)
