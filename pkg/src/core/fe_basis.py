"""
Second-type Nedelec edge elements of order p = 1, 2, 3 on tetrahedra.

The local space is the full (P_p)^3. Degrees of freedom are the standard
second-family moments:
    edges    int_e (v . t) q ds            q in P_p(e)          p+1 per edge
    faces    int_f (v_T . q) dA            q in RT-type D_{p-1}  p^2-1 per face
    interior int_K v . q dx                q in D_{p-2}(K)       (p-2)(p-1)(p+1)/2
Edge and face moments are written in the parametrisation induced by the
*global* vertex order of the entity (edge from lower to higher vertex
index, face from its ascending vertex triple). With un-normalised tangents
these functionals are invariant under the covariant map
v = B^{-T} vhat o F^{-1}, so both elements sharing an entity evaluate the
same functional and the dual bases glue into an H(curl)-conforming space.

An element's functionals therefore depend only on the ranking of its four
global vertex indices. For every ranking class the dual basis is obtained
once by inverting the functional Gram matrix on a monomial basis of
(P_p)^3 and cached.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import legvander

from src.core.mesh import LOCAL_EDGES, LOCAL_FACES, REFERENCE_VERTICES, cube_dof_count
from src.core.quadrature import interval_rule, tet_rule, tri_rule

logger = logging.getLogger(__name__)

SUPPORTED_ORDERS = (1, 2, 3)
IDENTITY_RANK = (0, 1, 2, 3)
# monomials are centred at the reference centroid for conditioning
_CENTROID = np.full(3, 0.25)


class BasisError(ValueError):
    """Raised for unsupported orders or degenerate element maps."""


def _check_order(p):
    if p not in SUPPORTED_ORDERS:
        raise BasisError(f"不支持的多项式阶数 p={p}，仅支持 {SUPPORTED_ORDERS}")


def edge_dofs(p):
    return p + 1


def face_dofs(p):
    return p * p - 1


def interior_dofs(p):
    return max(0, (p - 2) * (p - 1) * (p + 1) // 2)


def local_dimension(p):
    return (p + 1) * (p + 2) * (p + 3) // 2


def monomial_exponents(degree, dim=3):
    """All exponent tuples of total degree <= `degree`, graded then lexicographic."""
    exps = [e for e in itertools.product(range(degree + 1), repeat=dim) if sum(e) <= degree]
    exps.sort(key=lambda e: (sum(e), tuple(-x for x in e)))
    return np.array(exps, dtype=np.int64).reshape(-1, dim)


def monomial_values(points, exponents, derivative=None):
    """
    Evaluate monomials (or one of their partial derivatives) at points.

    Args:
        points: Array of shape (n, dim)
        exponents: Integer array of shape (K, dim)
        derivative: Optional derivative order per coordinate, length dim

    Returns:
        np.ndarray: Values of shape (n, K)
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    powers = np.array(exponents, dtype=np.int64, copy=True)
    coef = np.ones(len(powers))
    if derivative is not None:
        for axis, order in enumerate(derivative):
            for _ in range(order):
                coef = coef * powers[:, axis]
                powers[:, axis] = np.maximum(powers[:, axis] - 1, 0)
    return np.prod(points[:, None, :] ** powers[None, :, :], axis=2) * coef


def _rt_fields(points, degree, dim):
    """
    Raviart-Thomas type test fields (P_degree)^dim + x * homogeneous P_degree.

    Returns:
        np.ndarray: shape (n, nfields, dim)
    """
    exps = monomial_exponents(degree, dim)
    mono = monomial_values(points, exps)
    n = len(points)
    fields = []
    for comp in range(dim):
        for m in range(len(exps)):
            field = np.zeros((n, dim))
            field[:, comp] = mono[:, m]
            fields.append(field)
    for m in np.flatnonzero(exps.sum(axis=1) == degree):
        fields.append(points * mono[:, m][:, None])
    return np.stack(fields, axis=1)


def face_test_fields(p, points):
    return _rt_fields(np.atleast_2d(points), p - 2, 2)


def interior_test_fields(p, points):
    return _rt_fields(np.atleast_2d(points), p - 3, 3)


def oriented_edge(edge, rank):
    a, b = edge
    return (a, b) if rank[a] < rank[b] else (b, a)


def oriented_face(face, rank):
    return tuple(sorted(face, key=lambda v: rank[v]))


def dof_functionals(p, rank=IDENTITY_RANK):
    """
    Matrix of the DOF functionals applied to the monomial basis of (P_p)^3.

    Args:
        p: Polynomial order
        rank: Ranking of the four local vertices by global index

    Returns:
        np.ndarray: shape (n, n); column c*K + k is the field e_c * m_k
    """
    _check_order(p)
    exps = monomial_exponents(p)
    K = len(exps)
    V = REFERENCE_VERTICES
    blocks = []

    line = interval_rule(2 * p)
    s = line.points[:, 0]
    legendre = legvander(2.0 * s - 1.0, p)
    for edge in LOCAL_EDGES:
        a, b = oriented_edge(edge, rank)
        t = V[b] - V[a]
        mono = monomial_values(V[a] + s[:, None] * t - _CENTROID, exps)
        blocks.append(np.einsum('q,qj,c,qk->jck', line.weights, legendre, t, mono).reshape(-1, 3 * K))

    if p >= 2:
        tri = tri_rule(2 * p)
        tests = face_test_fields(p, tri.points)
        for face in LOCAL_FACES:
            a, b, c = oriented_face(face, rank)
            frame = np.stack([V[b] - V[a], V[c] - V[a]])
            mono = monomial_values(V[a] + tri.points @ frame - _CENTROID, exps)
            blocks.append(np.einsum('q,qjd,dc,qk->jck', tri.weights, tests, frame, mono).reshape(-1, 3 * K))

    if p >= 3:
        tet = tet_rule(2 * p)
        tests = interior_test_fields(p, tet.points)
        mono = monomial_values(tet.points - _CENTROID, exps)
        blocks.append(np.einsum('q,qjc,qk->jck', tet.weights, tests, mono).reshape(-1, 3 * K))

    return np.vstack(blocks)


@dataclass(frozen=True, eq=False)
class ReferenceBasis:
    """
    Dual basis of (P_p)^3 on the reference tetrahedron for one ranking class.

    `coefficients[:, i]` holds basis function i in the monomial basis,
    `functionals` the Gram matrix it inverts.
    """
    p: int
    rank: tuple
    exponents: np.ndarray
    coefficients: np.ndarray
    functionals: np.ndarray

    @property
    def size(self):
        return self.coefficients.shape[1]

    @property
    def layout(self):
        """(edge, face, interior) DOF counts of the local element."""
        return 6 * edge_dofs(self.p), 4 * face_dofs(self.p), interior_dofs(self.p)

    def _tensor(self):
        K = len(self.exponents)
        return self.coefficients.reshape(3, K, self.size)

    def values(self, points):
        """Basis values at reference points, shape (nq, n, 3)."""
        mono = monomial_values(np.atleast_2d(points) - _CENTROID, self.exponents)
        return np.einsum('qk,ckn->qnc', mono, self._tensor())

    def curls(self, points):
        """Reference curls at reference points, shape (nq, n, 3)."""
        shifted = np.atleast_2d(points) - _CENTROID
        grads = np.stack([monomial_values(shifted, self.exponents, np.eye(3, dtype=int)[d])
                          for d in range(3)])
        D = np.einsum('dqk,ckn->qncd', grads, self._tensor())
        return np.stack([D[..., 2, 1] - D[..., 1, 2],
                         D[..., 0, 2] - D[..., 2, 0],
                         D[..., 1, 0] - D[..., 0, 1]], axis=-1)

    def duality_error(self):
        """max |L Phi - I|, the deviation from exact duality."""
        return float(np.abs(self.functionals @ self.coefficients - np.eye(self.size)).max())


@lru_cache(maxsize=None)
def build_reference_basis(p, rank=IDENTITY_RANK):
    """
    Build the interpolatory basis for order p in the given orientation class.

    Args:
        p: Polynomial order (1, 2 or 3)
        rank: Ranking of the local vertices by global index

    Returns:
        ReferenceBasis: basis whose functional Gram matrix is the identity
    """
    _check_order(p)
    rank = tuple(int(r) for r in rank)
    if sorted(rank) != [0, 1, 2, 3]:
        raise BasisError(f"无效的顶点排序: {rank}")
    L = dof_functionals(p, rank)
    if L.shape[0] != local_dimension(p):
        raise BasisError(f"自由度数 {L.shape[0]} 与空间维数 {local_dimension(p)} 不符")
    coefficients = np.linalg.solve(L, np.eye(len(L)))
    # one step of iterative refinement
    coefficients = coefficients + coefficients @ (np.eye(len(L)) - L @ coefficients)
    for array in (L, coefficients):
        array.setflags(write=False)
    logger.debug(f"参考基函数: p={p}, rank={rank}, cond={np.linalg.cond(L):.3e}")
    return ReferenceBasis(p, rank, monomial_exponents(p), coefficients, L)


def push_forward(values_hat, curls_hat, element_map):
    """
    Covariant transform of reference fields to a physical element.

    v(x) = B^{-T} vhat(xhat), curl v(x) = B curlhat vhat(xhat) / det B,
    with x = F(xhat). Arrays carry the vector index last.

    Args:
        values_hat: Reference values, shape (..., 3)
        curls_hat: Reference curls, shape (..., 3)
        element_map: ElementMap with invertible B

    Returns:
        tuple: (values, curls) on the physical element
    """
    B = np.asarray(element_map.B, dtype=float)
    det = np.linalg.det(B)
    if abs(det) <= 1e-14 * max(1.0, np.abs(B).max()) ** 3:
        raise BasisError(f"单元映射奇异: det={det:.3e}")
    values = np.asarray(values_hat) @ np.linalg.inv(B)
    curls = np.asarray(curls_hat) @ B.T / det
    return values, curls


@dataclass(frozen=True, eq=False)
class DofMap:
    """
    Local-to-global DOF table.

    `cell_dofs[t, i]` is the global index of local DOF i of tetrahedron t.
    The orientation data is `ranks[t]`, the ranking of the element's
    vertices by global index; elements with equal ranking share
    `class_keys[classes[t]]` and hence the same dual basis.
    """
    p: int
    cell_dofs: np.ndarray
    ranks: np.ndarray
    classes: np.ndarray
    class_keys: tuple
    total_dofs: int
    n_edge_dofs: int
    n_face_dofs: int
    n_interior_dofs: int


def build_dof_map(mesh, p):
    """
    Number the global DOFs: edge blocks, then face blocks, then interiors.

    Args:
        mesh: Conforming Mesh
        p: Polynomial order

    Returns:
        DofMap
    """
    _check_order(p)
    ne, nf, ni = edge_dofs(p), face_dofs(p), interior_dofs(p)
    n_tets = mesh.n_tets
    ranks = np.argsort(np.argsort(mesh.tets, axis=1), axis=1)
    class_keys, classes = np.unique(ranks, axis=0, return_inverse=True)
    classes = classes.reshape(-1)

    columns = [mesh.tet_edges[:, e, None] * ne + np.arange(ne) for e in range(6)]
    face_offset = mesh.n_edges * ne
    if nf:
        columns += [face_offset + mesh.tet_faces[:, f, None] * nf + np.arange(nf) for f in range(4)]
    interior_offset = face_offset + mesh.n_faces * nf
    if ni:
        columns.append(interior_offset + np.arange(n_tets)[:, None] * ni + np.arange(ni))
    cell_dofs = np.hstack(columns).astype(np.int64)
    total = interior_offset + n_tets * ni

    if total != cube_dof_count(mesh.M, p):
        raise BasisError(f"自由度总数 {total} 与公式 {cube_dof_count(mesh.M, p)} 不一致")
    for array in (cell_dofs, ranks, classes):
        array.setflags(write=False)
    logger.debug(f"自由度映射: p={p}, 总数={total}, 方向类={len(class_keys)}")
    return DofMap(p, cell_dofs, ranks, classes,
                  tuple(tuple(int(r) for r in key) for key in class_keys),
                  int(total), ne, nf, ni)


class FeSpace:
    """The global edge element space V_h on a mesh."""

    def __init__(self, mesh, p):
        self.mesh = mesh
        self.p = p
        self.dof_map = build_dof_map(mesh, p)
        self.bases = tuple(build_reference_basis(p, key) for key in self.dof_map.class_keys)

    @property
    def total_dofs(self):
        return self.dof_map.total_dofs

    @property
    def local_size(self):
        return local_dimension(self.p)

    def class_groups(self):
        """Yield (basis, element indices) per orientation class."""
        for cls, basis in enumerate(self.bases):
            yield basis, np.flatnonzero(self.dof_map.classes == cls)

    def __repr__(self):
        return f"FeSpace(p={self.p}, M={self.mesh.M}, dofs={self.total_dofs})"
