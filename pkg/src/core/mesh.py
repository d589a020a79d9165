"""
Structured tetrahedral meshes of the unit cube.

The cube is divided into M x M x M cells of side h0 = 1/M and every cell
into the six Kuhn (Freudenthal) tetrahedra
    K_pi = {x : x_pi(0) >= x_pi(1) >= x_pi(2)},
one per permutation pi. Translated copies of this pattern share face
diagonals, so the mesh is conforming without case analysis.

Conventions:
    - vertex (i, j, k) has index (i*(M+1) + j)*(M+1) + k, coordinates (i, j, k)/M
    - edges are stored as (lo, hi) with lo < hi, faces as ascending triples
    - the local face f of a tetrahedron is the one opposite local vertex f
"""

import itertools
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

LOCAL_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
LOCAL_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))
REFERENCE_VERTICES = np.array([[0.0, 0.0, 0.0],
                               [1.0, 0.0, 0.0],
                               [0.0, 1.0, 0.0],
                               [0.0, 0.0, 1.0]])
KUHN_PERMUTATIONS = tuple(itertools.permutations(range(3)))

# scipy.sparse falls back to int32 indices for moderate sizes
_INDEX_LIMIT = np.iinfo(np.int32).max
_PLANE_TOL = 1e-12


class MeshError(ValueError):
    """Raised for invalid mesh parameters or geometric queries."""


def cube_dof_count(M, p):
    """Global DOF count of the order-p second-type edge element space on the M-cube mesh."""
    return M * (p + 1) * (3 * M * M * p * p + 3 * M * M * p + M * M + 6 * M * p + 3 * M + 3)


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.x, self.y, self.z])):
            raise MeshError(f"坐标必须是有限值: ({self.x}, {self.y}, {self.z})")

    def as_array(self):
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class ElementMap:
    """Affine map F(xhat) = B xhat + c from the reference tetrahedron."""
    B: np.ndarray
    c: np.ndarray

    @property
    def det(self):
        return float(np.linalg.det(self.B))

    def apply(self, xhat):
        return np.asarray(xhat) @ self.B.T + self.c

    def pullback(self, x):
        return np.linalg.solve(self.B, (np.asarray(x) - self.c).T).T


@dataclass(frozen=True, eq=False)
class Mesh:
    M: int
    vertices: np.ndarray
    tets: np.ndarray
    edges: np.ndarray
    faces: np.ndarray
    tet_edges: np.ndarray
    tet_faces: np.ndarray
    face_tets: np.ndarray
    face_local: np.ndarray
    boundary_faces: np.ndarray
    boundary_normals: np.ndarray
    jacobians: np.ndarray
    translations: np.ndarray
    determinants: np.ndarray

    @property
    def h0(self):
        return 1.0 / self.M

    @property
    def h(self):
        return np.sqrt(3.0) / self.M

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_tets(self):
        return len(self.tets)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def n_boundary_faces(self):
        return len(self.boundary_faces)

    @property
    def boundary_tets(self):
        return self.face_tets[self.boundary_faces, 0]

    @property
    def boundary_local_faces(self):
        return self.face_local[self.boundary_faces, 0]

    @property
    def interior_faces(self):
        return np.flatnonzero(self.face_tets[:, 1] >= 0)

    @property
    def volumes(self):
        return self.determinants / 6.0

    def point(self, index):
        return Point3(*map(float, self.vertices[index]))

    def element_map(self, tet):
        return ElementMap(self.jacobians[tet], self.translations[tet])

    def locate(self, points):
        """
        Find the tetrahedron containing each point and its reference coordinates.

        Uses the Kuhn structure: the cell comes from floor(x*M), the
        tetrahedron from the descending order of the in-cell coordinates.

        Args:
            points: Array of shape (n, 3) inside the closed unit cube

        Returns:
            tuple: (tet indices of shape (n,), reference coordinates of shape (n, 3))
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if np.any(points < -_PLANE_TOL) or np.any(points > 1.0 + _PLANE_TOL):
            raise MeshError("点不在单位立方体内")
        scaled = points * self.M
        cell = np.clip(np.floor(scaled).astype(np.int64), 0, self.M - 1)
        local = scaled - cell
        order = np.argsort(-local, axis=1, kind='stable')
        perm_index = {perm: n for n, perm in enumerate(KUHN_PERMUTATIONS)}
        kinds = np.array([perm_index[tuple(row)] for row in order])
        cell_index = (cell[:, 0] * self.M + cell[:, 1]) * self.M + cell[:, 2]
        tets = cell_index * 6 + kinds
        rel = points - self.translations[tets]
        xhat = np.linalg.solve(self.jacobians[tets], rel[..., None])[..., 0]
        return tets, xhat


def reference_face_frame(local_face):
    """
    Origin and spanning vectors of a local face of the reference tetrahedron.

    Returns:
        tuple: (origin (3,), frame (2, 3)); points are origin + (s, t) @ frame
    """
    a, b, c = LOCAL_FACES[local_face]
    V = REFERENCE_VERTICES
    return V[a], np.stack([V[b] - V[a], V[c] - V[a]])


def classify_boundary_face(coords):
    """
    Outward unit normal of a triangle lying on the boundary of (0,1)^3.

    Args:
        coords: Vertex coordinates of shape (3, 3)

    Returns:
        np.ndarray: +-e_i

    Raises:
        MeshError: if the triangle does not lie in one of the planes x_i = 0 or x_i = 1
    """
    coords = np.asarray(coords, dtype=float)
    for axis in range(3):
        values = coords[:, axis]
        for plane, sign in ((0.0, -1.0), (1.0, 1.0)):
            if np.all(np.abs(values - plane) < _PLANE_TOL):
                normal = np.zeros(3)
                normal[axis] = sign
                return normal
    raise MeshError(f"不是边界面: {coords.tolist()}")


def build_cube_mesh(M):
    """
    Build the Kuhn tetrahedral mesh of the unit cube.

    Args:
        M: Number of cells per direction (M >= 1)

    Returns:
        Mesh: Immutable mesh with entity tables and affine element maps
    """
    if isinstance(M, bool) or int(M) != M or M < 1:
        raise MeshError(f"M 必须是正整数: {M}")
    M = int(M)
    if cube_dof_count(M, 3) > _INDEX_LIMIT:
        raise MeshError(f"M={M} 过大: 自由度数超出索引类型范围")

    logger.info(f"开始构建网格: M={M}")
    n = M + 1
    vertices = np.indices((n, n, n)).reshape(3, -1).T / M

    offsets = np.array([n * n, n, 1])
    base = np.arange(n ** 3).reshape(n, n, n)[:-1, :-1, :-1].ravel()
    tets = np.empty((len(base), 6, 4), dtype=np.int64)
    for kind, perm in enumerate(KUHN_PERMUTATIONS):
        path = np.cumsum(offsets[list(perm)])
        tets[:, kind, 0] = base
        tets[:, kind, 1:] = base[:, None] + path[None, :]
        # odd permutations come out negatively oriented
        if np.linalg.det(np.eye(3)[list(perm)]) < 0:
            tets[:, kind, [2, 3]] = tets[:, kind, [3, 2]]
    tets = tets.reshape(-1, 4)
    n_tets = len(tets)

    # Edges
    all_edges = np.sort(tets[:, LOCAL_EDGES], axis=2).reshape(-1, 2)
    edges, edge_inverse = np.unique(all_edges, axis=0, return_inverse=True)
    tet_edges = edge_inverse.reshape(n_tets, 6)

    # Faces
    all_faces = np.sort(tets[:, LOCAL_FACES], axis=2).reshape(-1, 3)
    faces, face_inverse, counts = np.unique(all_faces, axis=0, return_inverse=True, return_counts=True)
    face_inverse = face_inverse.reshape(-1)
    if np.any(counts > 2):
        raise MeshError("网格不协调: 存在被两个以上单元共享的面")
    tet_faces = face_inverse.reshape(n_tets, 4)

    order = np.argsort(face_inverse, kind='stable')
    starts = np.searchsorted(face_inverse[order], np.arange(len(faces)))
    face_tets = np.full((len(faces), 2), -1, dtype=np.int64)
    face_local = np.full((len(faces), 2), -1, dtype=np.int64)
    first = order[starts]
    face_tets[:, 0], face_local[:, 0] = first // 4, first % 4
    shared = counts == 2
    second = order[starts[shared] + 1]
    face_tets[shared, 1], face_local[shared, 1] = second // 4, second % 4

    boundary_faces = np.flatnonzero(~shared)
    boundary_normals = np.array([classify_boundary_face(vertices[faces[f]]) for f in boundary_faces])

    # Element maps
    corners = vertices[tets]
    translations = corners[:, 0, :]
    jacobians = np.transpose(corners[:, 1:, :] - translations[:, None, :], (0, 2, 1))
    determinants = np.linalg.det(jacobians)
    if np.any(determinants <= 0):
        raise MeshError("存在非正向的单元映射")

    arrays = [vertices, tets, edges, faces, tet_edges, tet_faces, face_tets, face_local,
              boundary_faces, boundary_normals, jacobians, translations, determinants]
    for array in arrays:
        array.setflags(write=False)

    mesh = Mesh(M, *arrays)
    logger.info(f"网格构建完成: {mesh.n_vertices} 个顶点, {mesh.n_tets} 个四面体, "
                f"{mesh.n_edges} 条边, {mesh.n_faces} 个面, {mesh.n_boundary_faces} 个边界面")
    return mesh
