"""
Exact fields with closed-form derivatives, and the data f, g they induce.

For an exact field E the volume load and the impedance data are
    f = curl curl E - kappa^2 E                    in Omega
    g = curl E x nu - i kappa lambda E_T           on Gamma,  E_T = E - (E . nu) nu
Subclasses only supply the 2-jet of E (values, gradient, Hessian); curl
and curl curl are formed from it generically:
    curl curl E = grad div E - Laplace E.
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.core.fe_basis import monomial_exponents, monomial_values
from src.core.special_fn import j0, j1_over_z, j2_over_z2

logger = logging.getLogger(__name__)

_UNIT = np.eye(3)


@dataclass(frozen=True)
class ProblemParams:
    kappa: float
    lam: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.kappa) and self.kappa > 0):
            raise ValueError(f"波数 kappa 必须为正数: {self.kappa}")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"阻抗常数 lambda 必须为正数: {self.lam}")


def _curl_from_gradient(D):
    # D[..., c, d] = d_d E_c
    return np.stack([D[..., 2, 1] - D[..., 1, 2],
                     D[..., 0, 2] - D[..., 2, 0],
                     D[..., 1, 0] - D[..., 0, 1]], axis=-1)


def _curlcurl_from_hessian(H):
    # H[..., c, d, e] = d_d d_e E_c
    grad_div = np.einsum('...cci->...i', H)
    laplace = np.einsum('...cdd->...c', H)
    return grad_div - laplace


class ExactSolution:
    """Base class: evaluators for E, curl E, curl curl E, f and g."""

    def __init__(self, params):
        self.params = params

    def jet(self, x, order):
        """
        Values and derivatives of E at points.

        Args:
            x: Points of shape (n, 3)
            order: 0, 1 or 2

        Returns:
            tuple: (E,), (E, D) or (E, D, H) with D[n, c, d] = d_d E_c and
                   H[n, c, d, e] = d_d d_e E_c
        """
        raise NotImplementedError

    @staticmethod
    def _points(x):
        x = np.asarray(x, dtype=float)
        return np.atleast_2d(x), x.ndim == 1

    def eval_E(self, x):
        pts, single = self._points(x)
        E = self.jet(pts, 0)[0]
        return E[0] if single else E

    def eval_curlE(self, x):
        pts, single = self._points(x)
        curl = _curl_from_gradient(self.jet(pts, 1)[1])
        return curl[0] if single else curl

    def eval_fields(self, x):
        """E and curl E from a single jet evaluation."""
        pts, single = self._points(x)
        E, D = self.jet(pts, 1)
        curl = _curl_from_gradient(D)
        return (E[0], curl[0]) if single else (E, curl)

    def eval_curlcurlE(self, x):
        pts, single = self._points(x)
        cc = _curlcurl_from_hessian(self.jet(pts, 2)[2])
        return cc[0] if single else cc

    def eval_f(self, x):
        pts, single = self._points(x)
        E, _, H = self.jet(pts, 2)
        f = _curlcurl_from_hessian(H) - self.params.kappa ** 2 * E
        return f[0] if single else f

    def eval_g(self, x, normals):
        """
        Impedance data on the boundary.

        Args:
            x: Boundary points of shape (n, 3) or (3,)
            normals: Unit outward normals, broadcastable to x

        Returns:
            np.ndarray: complex g, tangential to nu
        """
        pts, single = self._points(x)
        nu = np.broadcast_to(np.asarray(normals, dtype=float), pts.shape)
        E, D = self.jet(pts, 1)
        curl = _curl_from_gradient(D)
        E_T = E - np.sum(E * nu, axis=1)[:, None] * nu
        g = np.cross(curl, nu) - 1j * self.params.kappa * self.params.lam * E_T
        return g[0] if single else g


class BesselSolution(ExactSolution):
    """
    E = (sin(kappa y) J0(kappa r), cos(kappa z) J0(kappa r), i kappa J0(kappa r)).

    With J = J0(kappa r), z = kappa r:
        grad J     = -kappa^2 j1_over_z(z) x
        Hess J     = -kappa^2 j1_over_z(z) I + kappa^4 j2_over_z2(z) x x^T
    Both quotients are regular at r = 0, so every evaluator is finite on
    the closed cube.
    """

    def jet(self, x, order):
        k = self.params.kappa
        r = np.linalg.norm(x, axis=1)
        J = j0(k * r)
        g = -k * k * j1_over_z(k * r)
        a, b = np.sin(k * x[:, 1]), np.cos(k * x[:, 2])
        E = np.stack([a * J, b * J, 1j * k * J], axis=1).astype(complex)
        if order == 0:
            return (E,)

        gradJ = g[:, None] * x
        da = k * np.cos(k * x[:, 1])
        db = -k * np.sin(k * x[:, 2])
        D = np.empty((len(x), 3, 3), dtype=complex)
        D[:, 0] = a[:, None] * gradJ + (J * da)[:, None] * _UNIT[1]
        D[:, 1] = b[:, None] * gradJ + (J * db)[:, None] * _UNIT[2]
        D[:, 2] = 1j * k * gradJ
        if order == 1:
            return E, D

        hessJ = g[:, None, None] * _UNIT + (k ** 4 * j2_over_z2(k * r))[:, None, None] * np.einsum('ni,nj->nij', x, x)
        ey_grad = np.einsum('i,nj->nij', _UNIT[1], gradJ)
        ez_grad = np.einsum('i,nj->nij', _UNIT[2], gradJ)
        H = np.empty((len(x), 3, 3, 3), dtype=complex)
        H[:, 0] = (a[:, None, None] * hessJ
                   + da[:, None, None] * (ey_grad + np.swapaxes(ey_grad, 1, 2))
                   - (k * k * a * J)[:, None, None] * np.outer(_UNIT[1], _UNIT[1]))
        H[:, 1] = (b[:, None, None] * hessJ
                   + db[:, None, None] * (ez_grad + np.swapaxes(ez_grad, 1, 2))
                   - (k * k * b * J)[:, None, None] * np.outer(_UNIT[2], _UNIT[2]))
        H[:, 2] = 1j * k * hessJ
        return E, D, H


class PolynomialSolution(ExactSolution):
    """
    A complex vector polynomial field E_c = sum_k coefficients[c, k] x^exponents[k].

    Used for patch tests; a degree-0 instance is the constant-field hook
    with f = -kappa^2 E.
    """

    def __init__(self, params, exponents, coefficients):
        super().__init__(params)
        self.exponents = np.asarray(exponents, dtype=np.int64).reshape(-1, 3)
        self.coefficients = np.asarray(coefficients, dtype=complex).reshape(3, len(self.exponents))

    @property
    def degree(self):
        return int(self.exponents.sum(axis=1).max()) if len(self.exponents) else 0

    @classmethod
    def random(cls, params, degree, rng, complex_valued=True):
        exps = monomial_exponents(degree)
        coef = rng.standard_normal((3, len(exps)))
        if complex_valued:
            coef = coef + 1j * rng.standard_normal((3, len(exps)))
        return cls(params, exps, coef)

    @classmethod
    def constant(cls, params, vector):
        return cls(params, [[0, 0, 0]], np.asarray(vector, dtype=complex).reshape(3, 1))

    @classmethod
    def from_terms(cls, params, terms):
        """
        Args:
            terms: dict {(component, (a, b, c)): coefficient}
        """
        exps = sorted({tuple(e) for _, e in terms})
        index = {e: n for n, e in enumerate(exps)}
        coef = np.zeros((3, len(exps)), dtype=complex)
        for (comp, e), value in terms.items():
            coef[comp, index[tuple(e)]] += value
        return cls(params, exps, coef)

    def scaled(self, alpha):
        return PolynomialSolution(self.params, self.exponents, alpha * self.coefficients)

    def jet(self, x, order):
        E = monomial_values(x, self.exponents) @ self.coefficients.T
        if order == 0:
            return (E,)
        D = np.stack([monomial_values(x, self.exponents, _UNIT[d].astype(int)) @ self.coefficients.T
                      for d in range(3)], axis=-1)
        if order == 1:
            return E, D
        H = np.empty((len(x), 3, 3, 3), dtype=complex)
        for d in range(3):
            for e in range(d, 3):
                deriv = (_UNIT[d] + _UNIT[e]).astype(int)
                H[:, :, d, e] = monomial_values(x, self.exponents, deriv) @ self.coefficients.T
                H[:, :, e, d] = H[:, :, d, e]
        return E, D, H
