"""
Galerkin assembly of the impedance problem

    a(u, v) = (curl u, curl v) - kappa^2 (u, v) - i kappa lambda <u_T, v_T>
    b(v)    = (f, v) + <g, v_T>

with real basis functions, so A = S - kappa^2 Mv - i kappa lambda B.

Element matrices come from reference tensors contracted with the affine
geometry of each element (exact for straight tetrahedra), e.g.
    M_K[i, j] = |det B| sum_cd (B^-1 B^-T)[c, d] Mhat[i, j, c, d].
All matrices share one CSR pattern built from the element DOF table.
Values are summed with np.bincount in element order, so the result does
not depend on how elements were split between threads.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import sparse

from src.core.config import QuadraturePolicy
from src.core.fe_basis import build_reference_basis
from src.core.mesh import reference_face_frame
from src.core.quadrature import tet_rule, tri_rule

logger = logging.getLogger(__name__)

# elements per work item; fixed so that serial and threaded runs do identical arithmetic
_ELEMENT_CHUNK = 1024
# quadrature points per data evaluation batch
_POINTS_PER_CHUNK = 1 << 16


class AssemblyError(RuntimeError):
    """Raised when the DOF table and the mesh disagree."""


@lru_cache(maxsize=None)
def _volume_tensors(p, rank, degree):
    basis = build_reference_basis(p, rank)
    rule = tet_rule(degree)
    vals = basis.values(rule.points)
    curls = basis.curls(rule.points)
    mass = np.einsum('q,qic,qjd->ijcd', rule.weights, vals, vals, optimize=False)
    stiff = np.einsum('q,qic,qjd->ijcd', rule.weights, curls, curls, optimize=False)
    return mass, stiff


@lru_cache(maxsize=None)
def _face_tensor(p, rank, local_face, degree):
    basis = build_reference_basis(p, rank)
    rule = tri_rule(degree)
    origin, frame = reference_face_frame(local_face)
    vals = basis.values(origin + rule.points @ frame)
    return np.einsum('q,qic,qjd->ijcd', rule.weights, vals, vals, optimize=False)


def face_jacobians(jacobians, local_faces):
    """Area scaling |B t1 x B t2| of mapped reference faces (reference area 1/2 is in the weights)."""
    frames = np.stack([reference_face_frame(lf)[1] for lf in range(4)])[local_faces]
    mapped = np.einsum('kxd,ktd->ktx', jacobians, frames)
    return np.linalg.norm(np.cross(mapped[:, 0], mapped[:, 1]), axis=1)


def _chunks(indices, size):
    for start in range(0, len(indices), size):
        yield indices[start:start + size]


def _run(tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        for task in tasks:
            task()
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # surface the first exception
        for future in [pool.submit(task) for task in tasks]:
            future.result()


@dataclass(frozen=True, eq=False)
class SparsityPattern:
    """CSR pattern of the element DOF adjacency with a scatter index per element entry."""
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    keys: np.ndarray

    @property
    def nnz(self):
        return len(self.indices)

    def positions(self, rows, cols):
        """Positions in the data array of entries (rows, cols); all must be in the pattern."""
        pos = np.searchsorted(self.keys, rows.astype(np.int64) * self.n + cols)
        if np.any(pos >= self.nnz) or np.any(self.keys[np.minimum(pos, self.nnz - 1)] != rows * self.n + cols):
            raise AssemblyError("存在不在稀疏模式中的矩阵元素")
        return pos

    def matrix(self, data):
        return sparse.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n))


def build_pattern(cell_dofs, n):
    """
    Sparsity pattern from the DOF table: (i, j) is structural iff DOFs i and j share an element.

    Args:
        cell_dofs: Integer array (n_elements, n_local)
        n: Global dimension

    Returns:
        SparsityPattern
    """
    rows = np.repeat(cell_dofs, cell_dofs.shape[1], axis=1).astype(np.int64)
    cols = np.tile(cell_dofs, (1, cell_dofs.shape[1])).astype(np.int64)
    keys = np.unique(rows.ravel() * n + cols.ravel())
    indptr = np.searchsorted(keys // n, np.arange(n + 1)).astype(np.int64)
    indices = (keys % n).astype(np.int64)
    return SparsityPattern(n, indptr, indices, keys)


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    A: sparse.csr_matrix
    b: np.ndarray
    S: sparse.csr_matrix
    Mv: sparse.csr_matrix
    B: sparse.csr_matrix
    params: object
    space: object
    matrix_degree: int
    data_degree: int
    timings: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.A.shape[0]

    def decomposition_error(self):
        """max |A - (S - kappa^2 Mv - i kappa lambda B)| / max |A|."""
        k, lam = self.params.kappa, self.params.lam
        rebuilt = self.S - k * k * self.Mv - 1j * k * lam * self.B
        diff = abs(self.A - rebuilt).max()
        return float(diff / abs(self.A).max())

    def symmetry_error(self):
        """max |A - A^T| / max |A| (complex symmetric, not Hermitian)."""
        return float(abs(self.A - self.A.T).max() / abs(self.A).max())

    def garding_terms(self, u):
        """
        Both sides of (Re - Im)(u^H A u) = u^H S u - kappa^2 u^H Mv u + kappa lambda u^H B u.

        Returns:
            tuple: (lhs, rhs) as floats
        """
        u = np.asarray(u, dtype=complex)
        k, lam = self.params.kappa, self.params.lam
        q = np.vdot(u, self.A @ u)
        s = np.vdot(u, self.S @ u).real
        m = np.vdot(u, self.Mv @ u).real
        bb = np.vdot(u, self.B @ u).real
        return float(q.real - q.imag), float(s - k * k * m + k * lam * bb)


def _element_blocks(space, degree, workers):
    """Local curl-curl and mass matrices, indexed by element."""
    mesh = space.mesh
    n_loc = space.local_size
    stiff_loc = np.empty((mesh.n_tets, n_loc, n_loc))
    mass_loc = np.empty((mesh.n_tets, n_loc, n_loc))
    tasks = []

    for basis, elements in space.class_groups():
        mass_ref, stiff_ref = _volume_tensors(space.p, basis.rank, degree)
        for els in _chunks(elements, _ELEMENT_CHUNK):
            def task(els=els, mass_ref=mass_ref, stiff_ref=stiff_ref):
                B = mesh.jacobians[els]
                det = mesh.determinants[els]
                Binv = np.linalg.inv(B)
                G = np.einsum('kcx,kdx->kcd', Binv, Binv, optimize=False)
                C = np.einsum('kxc,kxd->kcd', B, B, optimize=False)
                mass_loc[els] = det[:, None, None] * np.einsum('kcd,ijcd->kij', G, mass_ref, optimize=False)
                stiff_loc[els] = np.einsum('kcd,ijcd->kij', C, stiff_ref, optimize=False) / det[:, None, None]
            tasks.append(task)

    _run(tasks, workers)
    return stiff_loc, mass_loc


def _boundary_blocks(space, degree, workers):
    """Local tangential boundary mass matrices, indexed by boundary face."""
    mesh = space.mesh
    tets = mesh.boundary_tets
    local_faces = mesh.boundary_local_faces
    classes = space.dof_map.classes[tets]
    n_loc = space.local_size
    blocks = np.empty((len(tets), n_loc, n_loc))
    tasks = []

    for cls, basis in enumerate(space.bases):
        for lf in range(4):
            selected = np.flatnonzero((classes == cls) & (local_faces == lf))
            if not len(selected):
                continue
            ref = _face_tensor(space.p, basis.rank, lf, degree)
            for sel in _chunks(selected, _ELEMENT_CHUNK):
                def task(sel=sel, ref=ref):
                    B = mesh.jacobians[tets[sel]]
                    Binv = np.linalg.inv(B)
                    nu = mesh.boundary_normals[sel]
                    P = np.eye(3) - np.einsum('kx,ky->kxy', nu, nu)
                    G = np.einsum('kcx,kxy,kdy->kcd', Binv, P, Binv, optimize=False)
                    jf = face_jacobians(B, local_faces[sel])
                    blocks[sel] = jf[:, None, None] * np.einsum('kcd,ijcd->kij', G, ref, optimize=False)
                tasks.append(task)

    _run(tasks, workers)
    return blocks


def _load_blocks(space, exact, degree, workers):
    """Local load vectors: volume part per element, boundary part per boundary face."""
    mesh = space.mesh
    n_loc = space.local_size
    vol = np.zeros((mesh.n_tets, n_loc), dtype=complex)
    tets = mesh.boundary_tets
    local_faces = mesh.boundary_local_faces
    bnd = np.zeros((len(tets), n_loc), dtype=complex)
    classes = space.dof_map.classes[tets]
    tasks = []

    rule = tet_rule(degree)
    chunk = max(1, _POINTS_PER_CHUNK // len(rule))
    for basis, elements in space.class_groups():
        vals = basis.values(rule.points)
        for els in _chunks(elements, chunk):
            def task(els=els, vals=vals):
                B = mesh.jacobians[els]
                x = np.einsum('kxd,qd->kqx', B, rule.points) + mesh.translations[els][:, None, :]
                f = exact.eval_f(x.reshape(-1, 3)).reshape(len(els), -1, 3)
                fhat = np.einsum('kdc,kqc->kqd', np.linalg.inv(B), f)
                vol[els] = mesh.determinants[els][:, None] * np.einsum('q,qid,kqd->ki', rule.weights, vals, fhat)
            tasks.append(task)

    face_rule = tri_rule(degree)
    chunk = max(1, _POINTS_PER_CHUNK // len(face_rule))
    for cls, basis in enumerate(space.bases):
        for lf in range(4):
            selected = np.flatnonzero((classes == cls) & (local_faces == lf))
            if not len(selected):
                continue
            origin, frame = reference_face_frame(lf)
            xhat = origin + face_rule.points @ frame
            vals = basis.values(xhat)
            for sel in _chunks(selected, chunk):
                def task(sel=sel, vals=vals, xhat=xhat):
                    t = tets[sel]
                    B = mesh.jacobians[t]
                    x = np.einsum('kxd,qd->kqx', B, xhat) + mesh.translations[t][:, None, :]
                    nu = np.repeat(mesh.boundary_normals[sel], len(xhat), axis=0)
                    g = exact.eval_g(x.reshape(-1, 3), nu).reshape(len(sel), -1, 3)
                    ghat = np.einsum('kdc,kqc->kqd', np.linalg.inv(B), g)
                    jf = face_jacobians(B, local_faces[sel])
                    bnd[sel] = jf[:, None] * np.einsum('q,qid,kqd->ki', face_rule.weights, vals, ghat)
                tasks.append(task)

    _run(tasks, workers)
    return vol, bnd


def _scatter(pattern, rows, cols, values):
    pos = pattern.positions(rows.ravel(), cols.ravel())
    return np.bincount(pos, weights=values.ravel(), minlength=pattern.nnz)


def assemble_load(space, exact, degree, workers=1):
    """
    Assemble b[i] = (f, phi_i) + <g, phi_i,T>.

    Args:
        space: FeSpace
        exact: ExactSolution providing eval_f and eval_g
        degree: Quadrature degree for the data integrals
        workers: Thread count

    Returns:
        np.ndarray: complex load vector
    """
    mesh = space.mesh
    cell_dofs = space.dof_map.cell_dofs
    vol, bnd = _load_blocks(space, exact, degree, workers)
    dofs = np.concatenate([cell_dofs.ravel(), cell_dofs[mesh.boundary_tets].ravel()])
    values = np.concatenate([vol.ravel(), bnd.ravel()])
    n = space.total_dofs
    return (np.bincount(dofs, weights=values.real, minlength=n)
            + 1j * np.bincount(dofs, weights=values.imag, minlength=n))


def assemble(space, exact, policy=None, params=None, workers=1):
    """
    Assemble the discrete impedance problem.

    Args:
        space: FeSpace (carries the mesh)
        exact: ExactSolution defining f and g
        policy: QuadraturePolicy, defaults to the standard degrees
        params: ProblemParams, defaults to exact.params
        workers: Number of assembly threads

    Returns:
        AssembledSystem
    """
    policy = policy or QuadraturePolicy()
    params = params or exact.params
    mesh = space.mesh
    dof_map = space.dof_map
    n = space.total_dofs
    if dof_map.cell_dofs.shape != (mesh.n_tets, space.local_size):
        raise AssemblyError(f"自由度表形状 {dof_map.cell_dofs.shape} 与网格不一致")
    if dof_map.cell_dofs.min() < 0 or dof_map.cell_dofs.max() >= n:
        raise AssemblyError("自由度表中存在越界的全局编号")

    matrix_degree = policy.matrix_degree(space.p)
    data_degree = policy.data_degree(space.p, params.kappa, mesh.h)
    logger.info(f"开始组装: p={space.p}, M={mesh.M}, kappa={params.kappa}, 自由度={n}")
    logger.debug(f"积分阶数: 矩阵={matrix_degree}, 数据={data_degree}, 线程={workers}")

    start = time.perf_counter()
    cell_dofs = dof_map.cell_dofs
    pattern = build_pattern(cell_dofs, n)
    rows = np.repeat(cell_dofs[:, :, None], cell_dofs.shape[1], axis=2)
    cols = np.repeat(cell_dofs[:, None, :], cell_dofs.shape[1], axis=1)

    stiff_loc, mass_loc = _element_blocks(space, matrix_degree, workers)
    s_data = _scatter(pattern, rows, cols, stiff_loc)
    m_data = _scatter(pattern, rows, cols, mass_loc)

    bnd_loc = _boundary_blocks(space, matrix_degree, workers)
    bt = mesh.boundary_tets
    b_data = _scatter(pattern, rows[bt], cols[bt], bnd_loc)

    k, lam = params.kappa, params.lam
    a_data = s_data - k * k * m_data - 1j * k * lam * b_data
    matrix_time = time.perf_counter() - start

    load = assemble_load(space, exact, data_degree, workers)
    total_time = time.perf_counter() - start

    system = AssembledSystem(
        A=pattern.matrix(a_data), b=load,
        S=pattern.matrix(s_data), Mv=pattern.matrix(m_data), B=pattern.matrix(b_data),
        params=params, space=space,
        matrix_degree=matrix_degree, data_degree=data_degree,
        timings={"matrix_s": matrix_time, "assemble_s": total_time},
    )
    logger.info(f"组装完成: nnz={pattern.nnz}, 用时 {total_time:.2f}s")
    return system
