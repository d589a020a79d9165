"""
Edge element interpolation, evaluation of discrete fields and error norms.

Norms used throughout (kappa, lambda from the problem):
    energy       |||v|||   = (||curl v||^2 + kappa^2 ||v||^2)^(1/2)
    full energy  ||v||_E   = (|||v|||^2 + kappa lambda ||v_T||_Gamma^2)^(1/2)
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import legvander

from src.core.assembly import face_jacobians
from src.core.config import QuadraturePolicy
from src.core.fe_basis import face_test_fields, interior_test_fields
from src.core.mesh import reference_face_frame
from src.core.quadrature import interval_rule, tet_rule, tri_rule

logger = logging.getLogger(__name__)

_POINTS_PER_CHUNK = 1 << 16


class NormError(ValueError):
    """Raised when a relative error would divide by zero."""


@dataclass(frozen=True, eq=False)
class FieldCoefficients:
    """A discrete field: complex coefficients over the global DOFs of `space`."""
    values: np.ndarray
    space: object

    def __post_init__(self):
        if len(self.values) != self.space.total_dofs:
            raise ValueError(f"系数长度 {len(self.values)} 与自由度数 {self.space.total_dofs} 不符")

    def __len__(self):
        return len(self.values)

    def scaled(self, alpha):
        return FieldCoefficients(alpha * self.values, self.space)

    def __sub__(self, other):
        return FieldCoefficients(self.values - other.values, self.space)

    @classmethod
    def zeros(cls, space):
        return cls(np.zeros(space.total_dofs, dtype=complex), space)


@dataclass(frozen=True)
class NormSet:
    l2: float
    curl: float
    trace: float
    kappa: float
    lam: float

    @property
    def kappa_l2(self):
        return self.kappa * self.l2

    @property
    def energy(self):
        return float(np.sqrt(self.curl ** 2 + self.kappa ** 2 * self.l2 ** 2))

    @property
    def full_energy(self):
        return float(np.sqrt(self.energy ** 2 + self.kappa * self.lam * self.trace ** 2))


@dataclass(frozen=True)
class ErrorReport:
    """Absolute errors and the matching norms of the exact field, same quadrature."""
    error: NormSet
    exact: NormSet

    @staticmethod
    def _ratio(num, den, name):
        if den == 0:
            raise NormError(f"精确解的 {name} 范数为零，无法计算相对误差")
        return num / den

    @property
    def rel_l2(self):
        return self._ratio(self.error.l2, self.exact.l2, "L2")

    @property
    def rel_curl(self):
        return self._ratio(self.error.curl, self.exact.curl, "curl")

    @property
    def rel_trace(self):
        return self._ratio(self.error.trace, self.exact.trace, "边界切向")

    @property
    def rel_energy(self):
        return self._ratio(self.error.energy, self.exact.energy, "能量")

    @property
    def rel_full_energy(self):
        return self._ratio(self.error.full_energy, self.exact.full_energy, "全能量")


def _chunks(indices, size):
    for start in range(0, len(indices), size):
        yield indices[start:start + size]


def _evaluate_on_elements(space, coeffs, els, vals_hat, curls_hat):
    """Values and curls of the discrete field at mapped reference points of elements `els`."""
    mesh = space.mesh
    B = mesh.jacobians[els]
    U = coeffs[space.dof_map.cell_dofs[els]]
    v_hat = np.einsum('ki,kqic->kqc', U, vals_hat) if vals_hat.ndim == 4 else np.einsum('ki,qic->kqc', U, vals_hat)
    values = np.einsum('kqc,kcd->kqd', v_hat, np.linalg.inv(B))
    if curls_hat is None:
        return values, None
    c_hat = np.einsum('ki,kqic->kqc', U, curls_hat) if curls_hat.ndim == 4 else np.einsum('ki,qic->kqc', U, curls_hat)
    curls = np.einsum('kqc,kxc->kqx', c_hat, B) / mesh.determinants[els][:, None, None]
    return values, curls


def _mapped_points(mesh, els, xhat):
    return np.einsum('kxd,qd->kqx', mesh.jacobians[els], xhat) + mesh.translations[els][:, None, :]


def interpolate(exact, space, degree=None):
    """
    The edge element interpolant: all DOF functionals applied to the exact field.

    Edge and face moments are taken on the physical entities in their
    global orientation, so shared DOFs are computed once. Interior moments
    use the covariant pullback E(F(xhat)) B on each element.

    Args:
        exact: ExactSolution
        space: FeSpace
        degree: Quadrature degree, defaults to max(2p+2, data degree)

    Returns:
        FieldCoefficients
    """
    mesh, p, dof_map = space.mesh, space.p, space.dof_map
    degree = _degree_for(space, exact.params, degree)
    coeffs = np.zeros(space.total_dofs, dtype=complex)
    verts = mesh.vertices

    # edges
    line = interval_rule(degree)
    s = line.points[:, 0]
    legendre = legvander(2.0 * s - 1.0, p)
    ne = dof_map.n_edge_dofs
    chunk = max(1, _POINTS_PER_CHUNK // len(s))
    edge_values = np.empty((mesh.n_edges, ne), dtype=complex)
    for sel in _chunks(np.arange(mesh.n_edges), chunk):
        a, b = verts[mesh.edges[sel, 0]], verts[mesh.edges[sel, 1]]
        t = b - a
        x = a[:, None, :] + s[None, :, None] * t[:, None, :]
        E = exact.eval_E(x.reshape(-1, 3)).reshape(len(sel), len(s), 3)
        edge_values[sel] = np.einsum('q,qj,kqc,kc->kj', line.weights, legendre, E, t)
    coeffs[:mesh.n_edges * ne] = edge_values.ravel()

    # faces
    nf = dof_map.n_face_dofs
    offset = mesh.n_edges * ne
    if nf:
        tri = tri_rule(degree)
        tests = face_test_fields(p, tri.points)
        chunk = max(1, _POINTS_PER_CHUNK // len(tri))
        face_values = np.empty((mesh.n_faces, nf), dtype=complex)
        for sel in _chunks(np.arange(mesh.n_faces), chunk):
            corners = verts[mesh.faces[sel]]
            frame = np.stack([corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]], axis=1)
            x = corners[:, 0][:, None, :] + np.einsum('qd,kdx->kqx', tri.points, frame)
            E = exact.eval_E(x.reshape(-1, 3)).reshape(len(sel), len(tri), 3)
            tangential = np.einsum('kqx,kdx->kqd', E, frame)
            face_values[sel] = np.einsum('q,qjd,kqd->kj', tri.weights, tests, tangential)
        coeffs[offset:offset + mesh.n_faces * nf] = face_values.ravel()
    offset += mesh.n_faces * nf

    # interiors
    ni = dof_map.n_interior_dofs
    if ni:
        tet = tet_rule(degree)
        tests = interior_test_fields(p, tet.points)
        chunk = max(1, _POINTS_PER_CHUNK // len(tet))
        interior_values = np.empty((mesh.n_tets, ni), dtype=complex)
        for els in _chunks(np.arange(mesh.n_tets), chunk):
            x = _mapped_points(mesh, els, tet.points)
            E = exact.eval_E(x.reshape(-1, 3)).reshape(len(els), len(tet), 3)
            E_hat = np.einsum('kqx,kxc->kqc', E, mesh.jacobians[els])
            interior_values[els] = np.einsum('q,qjc,kqc->kj', tet.weights, tests, E_hat)
        coeffs[offset:] = interior_values.ravel()

    logger.debug(f"插值完成: p={p}, M={mesh.M}, 积分阶数={degree}")
    return FieldCoefficients(coeffs, space)


def evaluate_field(space, u, points):
    """
    Sample a discrete field and its curl at arbitrary points of the closed cube.

    Args:
        space: FeSpace
        u: FieldCoefficients or coefficient array
        points: Array of shape (n, 3)

    Returns:
        tuple: (values (n, 3), curls (n, 3)), complex
    """
    coeffs = np.asarray(getattr(u, "values", u))
    points = np.atleast_2d(np.asarray(points, dtype=float))
    tets, xhat = space.mesh.locate(points)
    values = np.empty((len(points), 3), dtype=complex)
    curls = np.empty((len(points), 3), dtype=complex)
    classes = space.dof_map.classes[tets]
    for cls, basis in enumerate(space.bases):
        idx = np.flatnonzero(classes == cls)
        if not len(idx):
            continue
        # one point per element: treat each point as its own one-point rule
        vals_hat = basis.values(xhat[idx])[:, None]
        curls_hat = basis.curls(xhat[idx])[:, None]
        v, c = _evaluate_on_elements(space, coeffs, tets[idx], vals_hat, curls_hat)
        values[idx], curls[idx] = v[:, 0], c[:, 0]
    return values, curls


def _squared_norms(space, coeffs, exact, degree, kappa, lam):
    """
    Accumulate squared L2, curl and boundary-trace norms of u, E and E - u.

    `coeffs` or `exact` may be None (treated as zero).
    """
    mesh = space.mesh
    sums = {key: np.zeros(3) for key in ("u", "E", "diff")}

    def accumulate(slot, weights, E_vals, u_vals):
        if E_vals is not None:
            sums["E"][slot] += float(np.sum(weights * np.sum(np.abs(E_vals) ** 2, axis=-1)))
        if u_vals is not None:
            sums["u"][slot] += float(np.sum(weights * np.sum(np.abs(u_vals) ** 2, axis=-1)))
        diff = (E_vals if E_vals is not None else 0) - (u_vals if u_vals is not None else 0)
        sums["diff"][slot] += float(np.sum(weights * np.sum(np.abs(diff) ** 2, axis=-1)))

    tet = tet_rule(degree)
    chunk = max(1, _POINTS_PER_CHUNK // len(tet))
    for basis, elements in space.class_groups():
        vals_hat = basis.values(tet.points) if coeffs is not None else None
        curls_hat = basis.curls(tet.points) if coeffs is not None else None
        for els in _chunks(elements, chunk):
            w = mesh.determinants[els][:, None] * tet.weights[None, :]
            uv = uc = Ev = Ec = None
            if coeffs is not None:
                uv, uc = _evaluate_on_elements(space, coeffs, els, vals_hat, curls_hat)
            if exact is not None:
                Ev, Ec = exact.eval_fields(_mapped_points(mesh, els, tet.points).reshape(-1, 3))
                Ev, Ec = Ev.reshape(len(els), -1, 3), Ec.reshape(len(els), -1, 3)
            accumulate(0, w, Ev, uv)
            accumulate(1, w, Ec, uc)

    tri = tri_rule(degree)
    chunk = max(1, _POINTS_PER_CHUNK // len(tri))
    tets, local_faces = mesh.boundary_tets, mesh.boundary_local_faces
    classes = space.dof_map.classes[tets]
    for cls, basis in enumerate(space.bases):
        for lf in range(4):
            selected = np.flatnonzero((classes == cls) & (local_faces == lf))
            if not len(selected):
                continue
            origin, frame = reference_face_frame(lf)
            xhat = origin + tri.points @ frame
            vals_hat = basis.values(xhat) if coeffs is not None else None
            for sel in _chunks(selected, chunk):
                t = tets[sel]
                nu = mesh.boundary_normals[sel][:, None, :]
                w = face_jacobians(mesh.jacobians[t], local_faces[sel])[:, None] * tri.weights[None, :]
                uT = ET = None
                if coeffs is not None:
                    uv, _ = _evaluate_on_elements(space, coeffs, t, vals_hat, None)
                    uT = uv - np.sum(uv * nu, axis=-1, keepdims=True) * nu
                if exact is not None:
                    Ev = exact.eval_E(_mapped_points(mesh, t, xhat).reshape(-1, 3)).reshape(len(sel), -1, 3)
                    ET = Ev - np.sum(Ev * nu, axis=-1, keepdims=True) * nu
                accumulate(2, w, ET, uT)

    def norm_set(key):
        l2, curl, trace = np.sqrt(sums[key])
        return NormSet(float(l2), float(curl), float(trace), kappa, lam)

    return norm_set("u"), norm_set("E"), norm_set("diff")


def _degree_for(space, params, degree):
    if degree is not None:
        return degree
    return QuadraturePolicy().data_degree(space.p, params.kappa, space.mesh.h)


def field_norms(u, params, degree=None):
    """L2, curl and boundary-trace norms of a discrete field."""
    space = u.space
    norms, _, _ = _squared_norms(space, u.values, None, _degree_for(space, params, degree),
                                 params.kappa, params.lam)
    return norms


def exact_norms(exact, space, degree=None):
    """Norms of the exact field integrated on the mesh of `space`."""
    params = exact.params
    _, norms, _ = _squared_norms(space, None, exact, _degree_for(space, params, degree),
                                 params.kappa, params.lam)
    return norms


def error_norms(u, exact, degree=None):
    """
    Errors of a discrete field against the exact solution.

    Args:
        u: FieldCoefficients
        exact: ExactSolution
        degree: Quadrature degree (policy default if None)

    Returns:
        ErrorReport

    Raises:
        NormError: if the exact field has zero energy norm
    """
    params = exact.params
    space = u.space
    _, exact_set, diff_set = _squared_norms(space, u.values, exact, _degree_for(space, params, degree),
                                            params.kappa, params.lam)
    if exact_set.energy == 0:
        raise NormError("精确解能量范数为零")
    return ErrorReport(error=diff_set, exact=exact_set)


def load_norms(exact, space, degree=None):
    """(||f||_Omega, ||g||_Gamma) by quadrature on the mesh."""
    mesh = space.mesh
    degree = _degree_for(space, exact.params, degree)
    tet = tet_rule(degree)
    f_sq = 0.0
    chunk = max(1, _POINTS_PER_CHUNK // len(tet))
    for els in _chunks(np.arange(mesh.n_tets), chunk):
        f = exact.eval_f(_mapped_points(mesh, els, tet.points).reshape(-1, 3)).reshape(len(els), -1, 3)
        w = mesh.determinants[els][:, None] * tet.weights[None, :]
        f_sq += float(np.sum(w * np.sum(np.abs(f) ** 2, axis=-1)))

    tri = tri_rule(degree)
    g_sq = 0.0
    tets, local_faces = mesh.boundary_tets, mesh.boundary_local_faces
    for lf in range(4):
        selected = np.flatnonzero(local_faces == lf)
        origin, frame = reference_face_frame(lf)
        xhat = origin + tri.points @ frame
        for sel in _chunks(selected, max(1, _POINTS_PER_CHUNK // len(tri))):
            t = tets[sel]
            x = _mapped_points(mesh, t, xhat).reshape(-1, 3)
            nu = np.repeat(mesh.boundary_normals[sel], len(xhat), axis=0)
            g = exact.eval_g(x, nu).reshape(len(sel), -1, 3)
            w = face_jacobians(mesh.jacobians[t], local_faces[sel])[:, None] * tri.weights[None, :]
            g_sq += float(np.sum(w * np.sum(np.abs(g) ** 2, axis=-1)))
    return float(np.sqrt(f_sq)), float(np.sqrt(g_sq))


def stability_quotient(norms, f_norm, g_norm):
    """(||curl u|| + kappa ||u|| + kappa ||u_T||) / (||f|| + ||g||)."""
    den = f_norm + g_norm
    if den == 0:
        raise NormError("数据范数 ||f|| + ||g|| 为零")
    return (norms.curl + norms.kappa * norms.l2 + norms.kappa * norms.trace) / den


def stability_ratio(u, exact, degree=None):
    """Stability quotient of a discrete solution against the data of `exact`."""
    norms = field_norms(u, exact.params, degree)
    f_norm, g_norm = load_norms(exact, u.space, degree)
    return float(stability_quotient(norms, f_norm, g_norm))


def tangential_continuity_error(u, degree=4):
    """
    Largest jump of the tangential trace across interior faces, relative
    to the largest tangential value seen.

    Args:
        u: FieldCoefficients
        degree: Face quadrature degree (sets the sample points)

    Returns:
        float
    """
    space = u.space
    mesh = space.mesh
    faces = mesh.interior_faces
    tri = tri_rule(degree)
    corners = mesh.vertices[mesh.faces[faces]]
    frame = np.stack([corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]], axis=1)
    x = corners[:, 0][:, None, :] + np.einsum('qd,kdx->kqx', tri.points, frame)
    normal = np.cross(frame[:, 0], frame[:, 1])
    normal /= np.linalg.norm(normal, axis=1)[:, None]

    traces = []
    for side in range(2):
        tets = mesh.face_tets[faces, side]
        rel = x - mesh.translations[tets][:, None, :]
        xhat = np.einsum('kcx,kqx->kqc', np.linalg.inv(mesh.jacobians[tets]), rel)
        values = np.empty(x.shape, dtype=complex)
        classes = space.dof_map.classes[tets]
        for cls, basis in enumerate(space.bases):
            idx = np.flatnonzero(classes == cls)
            if not len(idx):
                continue
            vals_hat = basis.values(xhat[idx].reshape(-1, 3)).reshape(len(idx), len(tri), -1, 3)
            values[idx], _ = _evaluate_on_elements(space, u.values, tets[idx], vals_hat, None)
        traces.append(values - np.sum(values * normal[:, None, :], axis=-1, keepdims=True) * normal[:, None, :])

    scale = max(np.abs(traces[0]).max(), np.abs(traces[1]).max(), np.finfo(float).tiny)
    return float(np.abs(traces[0] - traces[1]).max() / scale)
