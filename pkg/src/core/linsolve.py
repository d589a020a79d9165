"""
Sparse complex linear solves: SuperLU by default, restarted GMRES with an
incomplete LU preconditioner as the memory-light alternative.
"""

import logging
import math
import re
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from src.core.config import SolverOptions

logger = logging.getLogger(__name__)

_PIVOT_SHIFTS = (1e-10, 1e-6, 1e-2)


class SingularMatrixError(RuntimeError):
    """Factorization hit a zero pivot; `pivot` is the offending row/column if known."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class ConvergenceError(RuntimeError):
    """GMRES stopped before reaching the tolerance."""

    def __init__(self, message, residual_history):
        super().__init__(message)
        self.residual_history = list(residual_history)


@dataclass
class SolveReport:
    x: np.ndarray
    residual: float
    method: str
    wall_time: float
    converged: bool
    iterations: Optional[int] = None
    residual_history: List[float] = field(default_factory=list)
    stats: dict = field(default_factory=dict)


def relative_residual(A, x, b):
    bnorm = np.linalg.norm(b)
    rnorm = np.linalg.norm(A @ x - b)
    return float(rnorm / bnorm) if bnorm > 0 else float(rnorm)


def _structural_pivot(A):
    """First empty row or column, or None."""
    A = A.tocsr(copy=True)
    A.eliminate_zeros()
    empty_rows = np.flatnonzero(np.diff(A.indptr) == 0)
    empty_cols = np.setdiff1d(np.arange(A.shape[1]), A.indices)
    candidates = np.concatenate([empty_rows, empty_cols])
    return int(candidates.min()) if len(candidates) else None


def _factorize(A, options):
    return spla.splu(A.tocsc(), permc_spec='MMD_AT_PLUS_A',
                     diag_pivot_thresh=options.pivot_threshold)


def _numerical_pivot(A, options):
    """
    Column of A where elimination breaks down.

    Factorizes diagonally shifted copies of A and takes the smallest |U_ii|,
    mapped back to the original column through perm_c.
    """
    scale = max(abs(A).max(), 1.0)
    identity = sparse.identity(A.shape[0], dtype=A.dtype, format='csr')
    for shift in _PIVOT_SHIFTS:
        try:
            lu = _factorize(A + shift * scale * identity, options)
        except RuntimeError:
            continue
        step = int(np.argmin(np.abs(lu.U.diagonal())))
        return int(np.argsort(lu.perm_c)[step])
    return int(np.argmin(np.abs(A.diagonal())))


def _solve_lu(A, b, options):
    try:
        lu = _factorize(A, options)
    except RuntimeError as e:
        match = re.search(r'\d+', str(e))
        pivot = int(match.group()) if match else _numerical_pivot(A, options)
        raise SingularMatrixError(f"LU 分解失败: {e} (主元列 {pivot})", pivot=pivot)
    x = lu.solve(b)
    stats = {"nnz_L": int(lu.L.nnz), "nnz_U": int(lu.U.nnz)}
    if relative_residual(A, x, b) > options.tol:
        # one refinement step
        x = x + lu.solve(b - A @ x)
        stats["refined"] = True
    return x, stats, None, []


def _solve_gmres(A, b, options):
    A = A.tocsc()
    try:
        ilu = spla.spilu(A, drop_tol=0.0, fill_factor=1.0)
    except RuntimeError as e:
        pivot = _numerical_pivot(A, options)
        raise SingularMatrixError(f"ILU 分解失败: {e} (主元列 {pivot})", pivot=pivot)
    precond = spla.LinearOperator(A.shape, ilu.solve, dtype=A.dtype)
    history = []
    maxiter = max(1, math.ceil(options.max_iterations / options.restart))
    x, info = spla.gmres(A, b, rtol=options.tol, atol=0.0, restart=options.restart,
                         maxiter=maxiter, M=precond,
                         callback=history.append, callback_type='pr_norm')
    if info > 0:
        raise ConvergenceError(f"GMRES 未在 {options.max_iterations} 次迭代内收敛", history)
    if info < 0:
        raise ConvergenceError(f"GMRES 输入无效 (info={info})", history)
    return x, {"ilu_nnz": int(ilu.L.nnz + ilu.U.nnz)}, len(history), history


def solve(A, b, options=None):
    """
    Solve A x = b.

    Args:
        A: Square sparse matrix
        b: Right-hand side
        options: SolverOptions (method, tolerance, residual gate)

    Returns:
        SolveReport: `converged` is False when the relative residual exceeds the gate

    Raises:
        ValueError: dimension mismatch
        SingularMatrixError: structurally or numerically singular matrix
        ConvergenceError: GMRES did not converge
    """
    options = options or SolverOptions()
    options.validate()
    A = sparse.csr_matrix(A, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"矩阵必须是方阵: {A.shape}")
    if A.shape[0] != len(b):
        raise ValueError(f"右端项长度 {len(b)} 与矩阵维数 {A.shape[0]} 不符")

    pivot = _structural_pivot(A)
    if pivot is not None:
        raise SingularMatrixError(f"矩阵结构奇异: 第 {pivot} 行/列为空", pivot=pivot)

    logger.info(f"开始求解: n={A.shape[0]}, nnz={A.nnz}, 方法={options.method}")
    start = time.perf_counter()
    if options.method == "lu":
        x, stats, iterations, history = _solve_lu(A, b, options)
    else:
        x, stats, iterations, history = _solve_gmres(A, b, options)
    elapsed = time.perf_counter() - start

    if not np.all(np.isfinite(x)):
        pivot = _numerical_pivot(A, options)
        raise SingularMatrixError(f"解中出现非有限值，矩阵数值奇异 (主元列 {pivot})", pivot=pivot)
    residual = relative_residual(A, x, b)
    converged = residual <= options.residual_gate
    if converged:
        logger.info(f"求解完成: 相对残差 {residual:.3e}, 用时 {elapsed:.2f}s")
    else:
        logger.warning(f"相对残差 {residual:.3e} 超过阈值 {options.residual_gate:.1e}")
    return SolveReport(x=x, residual=residual, method=options.method, wall_time=elapsed,
                       converged=converged, iterations=iterations,
                       residual_history=history, stats=stats)
