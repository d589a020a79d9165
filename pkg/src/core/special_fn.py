"""
Bessel functions of the first kind for real, non-negative arguments.

J0 and J1 come from scipy.special (Cephes: rational approximation on the
small-argument interval, Hankel asymptotics beyond). The quotients below
remove the removable singularities at z = 0 that appear when J0(kappa r)
is differentiated in Cartesian coordinates.
"""

import math

import numpy as np
from scipy import special

# below these arguments the quotients switch to their Taylor series
_J1_SERIES_CUTOFF = 1e-3
_J2_SERIES_CUTOFF = 0.5


def _as_output(z, out):
    return out[()] if np.ndim(z) == 0 else out


def j0(z):
    return special.j0(z)


def j1(z):
    return special.j1(z)


def j1_over_z(z):
    """J1(z)/z, continuous at z = 0 with value 1/2."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < _J1_SERIES_CUTOFF
    zl = z[~small]
    out[~small] = special.j1(zl) / zl
    z2 = z[small] ** 2
    out[small] = 0.5 - z2 / 16.0 + z2 * z2 / 384.0 - z2 ** 3 / 18432.0
    return _as_output(z, out)


def j2_over_z2(z):
    """
    J2(z)/z**2 with J2 = 2 J1(z)/z - J0(z), continuous at 0 with value 1/8.

    Needed for the Hessian of J0(kappa r):
    d_i d_j J0(kappa r) = -kappa^2 j1_over_z(kappa r) delta_ij
                          + kappa^4 j2_over_z2(kappa r) x_i x_j.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < _J2_SERIES_CUTOFF
    zl = z[~small]
    out[~small] = (2.0 * special.j1(zl) / zl - special.j0(zl)) / (zl * zl)
    z2 = z[small] ** 2
    # sum_k (-1)^k z^(2k) / (4^(k+1) k! (k+2)!)
    acc = np.zeros_like(z2)
    term_power = np.ones_like(z2)
    for k in range(7):
        acc += (-1) ** k * term_power / (4.0 ** (k + 1) * math.factorial(k) * math.factorial(k + 2))
        term_power = term_power * z2
    out[small] = acc
    return _as_output(z, out)
