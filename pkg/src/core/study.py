"""
实验编排模块

Runs assemble-solve-measure cycles over (p, kappa, M) and turns them into
StudyRecords, CSV tables and gnuplot scripts: the pollution sweep at fixed
DOFs per wavelength, convergence under mesh refinement, the stability
quotient sweep, single solves and the acceptance suite.
"""

import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from src.core.analysis import (FieldCoefficients, NormError, error_norms, evaluate_field, field_norms,
                               interpolate, stability_ratio, tangential_continuity_error)
from src.core.assembly import assemble
from src.core.config import StudyConfig
from src.core.exporters import write_csv, write_gnuplot_script, write_matrix_market, write_vtk
from src.core.fe_basis import FeSpace, interior_dofs
from src.core.linsolve import ConvergenceError, SingularMatrixError, solve
from src.core.manufactured import BesselSolution, PolynomialSolution, ProblemParams
from src.core.mesh import build_cube_mesh, cube_dof_count

logger = logging.getLogger(__name__)

# (CSV column, StudyRecord attribute); the first 18 columns are the standard header
_COLUMNS = (
    ("p", "p"), ("M", "M"), ("kappa", "kappa"), ("lambda", "lam"), ("dof", "dof"),
    ("nlambda", "nlambda"), ("h", "h"),
    ("rel_energy_sol", "rel_energy_sol"), ("rel_energy_interp", "rel_energy_interp"),
    ("rel_l2_sol", "rel_l2_sol"), ("rel_l2_interp", "rel_l2_interp"),
    ("rel_curl_sol", "rel_curl_sol"), ("rel_trace_sol", "rel_trace_sol"),
    ("stab_ratio", "stab_ratio"), ("residual", "residual"),
    ("assemble_s", "assemble_s"), ("solve_s", "solve_s"), ("flagged", "flagged"),
    ("matrix_degree", "matrix_degree"), ("data_degree", "data_degree"),
    ("abs_energy_sol", "abs_energy_sol"), ("abs_energy_interp", "abs_energy_interp"),
    ("rel_full_energy_sol", "rel_full_energy_sol"),
    ("rel_energy_sol_interpnorm", "rel_energy_sol_interpnorm"),
    ("kappa_h", "kappa_h"), ("pollution_param", "pollution_param"),
)
CSV_HEADER = tuple(column for column, _ in _COLUMNS)
TIMING_COLUMNS = ("assemble_s", "solve_s")

_NAN = float("nan")


class StudyError(ValueError):
    """Raised for cap violations and unusable study parameters."""


def nlambda(dof, kappa):
    """Degrees of freedom per wavelength, 2 pi dof^(1/3) / kappa."""
    return 2.0 * math.pi * float(np.cbrt(dof)) / kappa


@dataclass
class StudyRecord:
    p: int
    M: int
    kappa: float
    lam: float
    dof: int
    nlambda: float
    h: float
    rel_energy_sol: float = _NAN
    rel_energy_interp: float = _NAN
    rel_l2_sol: float = _NAN
    rel_l2_interp: float = _NAN
    rel_curl_sol: float = _NAN
    rel_trace_sol: float = _NAN
    stab_ratio: float = _NAN
    residual: float = _NAN
    assemble_s: float = 0.0
    solve_s: float = 0.0
    flagged: bool = False
    matrix_degree: int = 0
    data_degree: int = 0
    abs_energy_sol: float = _NAN
    abs_energy_interp: float = _NAN
    rel_full_energy_sol: float = _NAN
    rel_energy_sol_interpnorm: float = _NAN
    kappa_h: float = _NAN
    pollution_param: float = _NAN

    def row(self):
        return [getattr(self, attr) for _, attr in _COLUMNS]

    def comparable_row(self):
        """The CSV row without timing columns."""
        return [value for (column, _), value in zip(_COLUMNS, self.row()) if column not in TIMING_COLUMNS]

    @classmethod
    def from_row(cls, row):
        """Build a record from a parsed CSV row dict."""
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for column, attr in _COLUMNS:
            if column not in row:
                continue
            value = row[column]
            if types[attr] in (int, "int"):
                value = int(value)
            elif types[attr] in (float, "float"):
                value = float(value)
            elif types[attr] in (bool, "bool"):
                value = bool(value)
            values[attr] = value
        return cls(**values)

    def check(self):
        """Validate the record invariants (DOF formula and N_lambda)."""
        if self.dof != cube_dof_count(self.M, self.p):
            raise StudyError(f"自由度 {self.dof} 与公式不符 (p={self.p}, M={self.M})")
        expected = nlambda(self.dof, self.kappa)
        if abs(self.nlambda - expected) > 1e-12 * expected:
            raise StudyError(f"N_lambda {self.nlambda} 与 {expected} 不符")
        return self


@dataclass
class CaseResult:
    record: StudyRecord
    space: Optional[object] = None
    system: Optional[object] = None
    solution: Optional[FieldCoefficients] = None
    interpolant: Optional[FieldCoefficients] = None
    exact: Optional[object] = None


def choose_M_for_target_nlambda(kappa, p, target, max_M=64):
    """
    Smallest M whose DOF count gives at least `target` DOFs per wavelength.

    Args:
        kappa: Wave number
        p: Polynomial order
        target: Required N_lambda (> 0)
        max_M: Cap on M

    Returns:
        int: M

    Raises:
        StudyError: if target <= 0 or the required M exceeds max_M
    """
    if not target > 0:
        raise StudyError(f"N_lambda 目标值必须为正数: {target}")
    for M in range(1, max_M + 1):
        if nlambda(cube_dof_count(M, p), kappa) >= target:
            return M
    raise StudyError(f"kappa={kappa}, p={p} 需要 M > max_M={max_M} 才能达到 N_lambda={target}")


def fit_rate(hs, errors):
    """
    Least-squares slope of log(error) against log(h).

    Non-finite and non-positive errors are ignored.

    Returns:
        float: fitted slope, nan if fewer than two usable points
    """
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    mask = np.isfinite(errors) & (errors > 0) & np.isfinite(hs) & (hs > 0)
    if mask.sum() < 2:
        return _NAN
    slope, _ = np.polyfit(np.log(hs[mask]), np.log(errors[mask]), 1)
    return float(slope)


def _relative(report, name):
    # a component norm of the exact field may vanish (e.g. curl of a constant)
    try:
        return getattr(report, name)
    except NormError:
        return _NAN


def run_case(p, M, kappa, config=None, exact=None, workers=None, keep=False):
    """
    One assemble-solve-measure cycle.

    Args:
        p: Polynomial order
        M: Cells per direction
        kappa: Wave number
        config: StudyConfig (solver options, quadrature policy, caps)
        exact: ExactSolution, defaults to the Bessel field for (kappa, lambda)
        workers: Assembly threads, defaults to config.workers
        keep: Keep space, system and fields in the result

    Returns:
        CaseResult: record plus (if keep) the intermediate objects
    """
    config = config or StudyConfig()
    dof = cube_dof_count(M, p)
    if dof > config.max_dofs:
        raise StudyError(f"自由度 {dof} 超过上限 max_dofs={config.max_dofs} (p={p}, M={M})")
    params = ProblemParams(kappa, config.lam) if exact is None else exact.params
    exact = exact or BesselSolution(params)
    workers = config.workers if workers is None else workers

    mesh = build_cube_mesh(M)
    space = FeSpace(mesh, p)
    record = StudyRecord(p=p, M=M, kappa=float(params.kappa), lam=float(params.lam), dof=space.total_dofs,
                         nlambda=nlambda(space.total_dofs, params.kappa), h=float(mesh.h),
                         kappa_h=float(params.kappa * mesh.h),
                         pollution_param=float(params.kappa ** (2 * p + 1) * mesh.h ** (2 * p)))

    system = assemble(space, exact, config.quadrature, params=params, workers=workers)
    record.assemble_s = system.timings["assemble_s"]
    record.matrix_degree, record.data_degree = system.matrix_degree, system.data_degree
    degree = system.data_degree

    interp = interpolate(exact, space, degree)
    err_interp = error_norms(interp, exact, degree)
    record.rel_energy_interp = err_interp.rel_energy
    record.rel_l2_interp = _relative(err_interp, "rel_l2")
    record.abs_energy_interp = err_interp.error.energy

    solution = None
    try:
        report = solve(system.A, system.b, config.solver)
    except (SingularMatrixError, ConvergenceError) as e:
        logger.error(f"求解失败 (p={p}, M={M}, kappa={kappa}): {e}")
        record.flagged = True
    else:
        record.solve_s = report.wall_time
        record.residual = report.residual
        record.flagged = not report.converged
        solution = FieldCoefficients(report.x, space)
        err = error_norms(solution, exact, degree)
        record.rel_energy_sol = err.rel_energy
        record.rel_l2_sol = _relative(err, "rel_l2")
        record.rel_curl_sol = _relative(err, "rel_curl")
        record.rel_trace_sol = _relative(err, "rel_trace")
        record.rel_full_energy_sol = err.rel_full_energy
        record.abs_energy_sol = err.error.energy
        interp_energy = field_norms(interp, params, degree).energy
        record.rel_energy_sol_interpnorm = err.error.energy / interp_energy if interp_energy else _NAN
        record.stab_ratio = stability_ratio(solution, exact, degree)

    if record.flagged:
        logger.warning(f"结果已标记为无效: p={p}, M={M}, kappa={kappa}")
    logger.info(f"p={p} M={M} kappa={kappa:.4g} dof={record.dof} N_lambda={record.nlambda:.3g} "
                f"rel_energy={record.rel_energy_sol:.3e} (插值 {record.rel_energy_interp:.3e})")
    record.check()
    if keep:
        return CaseResult(record, space, system, solution, interp, exact)
    return CaseResult(record)


def _run_cases(cases, config, progress_callback=None):
    """Run (p, M, kappa) cases; records come back in case order."""
    total = len(cases)
    done = [0]
    lock = threading.Lock()

    def one(case):
        p, M, kappa = case
        assembly_workers = 1 if config.workers > 1 and total > 1 else config.workers
        record = run_case(p, M, kappa, config, workers=assembly_workers).record
        with lock:
            done[0] += 1
            if progress_callback:
                progress_callback(int(100 * done[0] / total))
        return record

    if config.workers > 1 and total > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(one, cases))
    return [one(case) for case in cases]


def write_records(path, records, kind):
    """Write records as CSV plus a sibling gnuplot script."""
    write_csv(path, CSV_HEADER, (r.row() for r in records))
    return write_gnuplot_script(path, kind)


def convergence_rates(records):
    """
    Fitted energy and L2 slopes per (p, kappa) over unflagged rows.

    Returns:
        dict: (p, kappa) -> dict with keys energy_sol, energy_interp, l2_sol, l2_interp,
        plus energy_sol_tail and l2_sol_tail fitted over the two finest meshes only
    """
    rates = {}
    keys = sorted({(r.p, r.kappa) for r in records})
    for key in keys:
        rows = sorted((r for r in records if (r.p, r.kappa) == key and not r.flagged), key=lambda r: -r.h)
        hs = [r.h for r in rows]
        rates[key] = {
            "energy_sol": fit_rate(hs, [r.rel_energy_sol for r in rows]),
            "energy_interp": fit_rate(hs, [r.rel_energy_interp for r in rows]),
            "l2_sol": fit_rate(hs, [r.rel_l2_sol for r in rows]),
            "l2_interp": fit_rate(hs, [r.rel_l2_interp for r in rows]),
            "energy_sol_tail": fit_rate(hs[-2:], [r.rel_energy_sol for r in rows[-2:]]),
            "l2_sol_tail": fit_rate(hs[-2:], [r.rel_l2_sol for r in rows[-2:]]),
        }
    return rates


def cell_magnitudes(space, u, exact=None):
    """|E_h| (and |E|, |E - E_h| if exact is given) at element centroids."""
    mesh = space.mesh
    centroids = mesh.vertices[mesh.tets].mean(axis=1)
    values, _ = evaluate_field(space, u, centroids)
    data = {"abs_Eh": np.linalg.norm(values, axis=1)}
    if exact is not None:
        E = exact.eval_E(centroids)
        data["abs_E"] = np.linalg.norm(E, axis=1)
        data["abs_error"] = np.linalg.norm(E - values, axis=1)
    return data


# ---------------------------------------------------------------------------
# acceptance suite


@dataclass
class AcceptanceResult:
    name: str
    passed: Optional[bool]
    detail: str
    seconds: float = 0.0


def _check_dof_formula(config, rng):
    bad = []
    for M in range(1, 5):
        mesh = build_cube_mesh(M)
        for p in (1, 2, 3):
            counted = (mesh.n_edges * (p + 1) + mesh.n_faces * (p * p - 1) + mesh.n_tets * interior_dofs(p))
            total = FeSpace(mesh, p).total_dofs
            if not (counted == total == M * (p + 1) * (3 * M * M * p * p + 3 * M * M * p + M * M
                                                      + 6 * M * p + 3 * M + 3)):
                bad.append((M, p, total))
    return not bad, f"不一致: {bad}" if bad else "M=1..4, p=1..3 全部一致"


def _check_entity_counts(config, rng):
    m1, m2 = build_cube_mesh(1), build_cube_mesh(2)
    got1 = (m1.n_vertices, m1.n_tets, m1.n_edges, m1.n_faces, m1.n_boundary_faces)
    got2 = (m2.n_vertices, m2.n_tets, m2.n_edges, m2.n_boundary_faces)
    ok = got1 == (8, 6, 19, 18, 12) and got2 == (27, 48, 98, 48)
    return ok, f"M=1: {got1}, M=2: {got2}"


def _check_duality_reproduction(config, rng):
    worst_dual, worst_rep = 0.0, 0.0
    space_mesh = build_cube_mesh(2)
    for p in (1, 2, 3):
        space = FeSpace(space_mesh, p)
        for basis in space.bases:
            worst_dual = max(worst_dual, basis.duality_error())
        field = PolynomialSolution.random(ProblemParams(1.0), p, rng)
        u = interpolate(field, space)
        pts = rng.random((200, 3))
        values, _ = evaluate_field(space, u, pts)
        exact = field.eval_E(pts)
        worst_rep = max(worst_rep, float(np.abs(values - exact).max() / np.abs(exact).max()))
    ok = worst_dual <= 1e-12 and worst_rep <= 1e-10
    return ok, f"对偶误差 {worst_dual:.2e}, 多项式再现误差 {worst_rep:.2e}"


def _check_tangential_continuity(config, rng):
    worst = 0.0
    mesh = build_cube_mesh(2)
    for p in (1, 2, 3):
        space = FeSpace(mesh, p)
        for _ in range(20):
            coeffs = rng.standard_normal(space.total_dofs) + 1j * rng.standard_normal(space.total_dofs)
            worst = max(worst, tangential_continuity_error(FieldCoefficients(coeffs, space)))
    return worst <= 1e-10, f"最大切向跳跃 {worst:.2e}"


def _check_matrix_identities(config, rng):
    worst_dec = worst_sym = worst_gard = 0.0
    mesh = build_cube_mesh(2)
    params = ProblemParams(7.0, config.lam)
    for p in (1, 2, 3):
        space = FeSpace(mesh, p)
        system = assemble(space, BesselSolution(params), config.quadrature)
        worst_dec = max(worst_dec, system.decomposition_error())
        worst_sym = max(worst_sym, system.symmetry_error())
        for _ in range(50):
            u = rng.standard_normal(space.total_dofs) + 1j * rng.standard_normal(space.total_dofs)
            lhs, rhs = system.garding_terms(u)
            worst_gard = max(worst_gard, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    ok = worst_dec <= 1e-12 and worst_sym <= 1e-12 and worst_gard <= 1e-10
    return ok, f"分解 {worst_dec:.1e}, 对称 {worst_sym:.1e}, Garding {worst_gard:.1e}"


def _check_patch_test(config, rng):
    worst = 0.0
    params = ProblemParams(3.0, config.lam)
    for p in (1, 2, 3):
        for degree in range(p + 1):
            exact = PolynomialSolution.random(params, degree, rng)
            result = run_case(p, 2, 3.0, config, exact=exact, keep=True)
            if result.solution is None:
                return False, f"p={p} 求解失败"
            worst = max(worst, error_norms(result.solution, exact).rel_l2)
    return worst <= 1e-8, f"最大相对 L2 误差 {worst:.2e}"


def _check_manufactured_data(config, rng):
    worst_curl = worst_f = 0.0
    pts = rng.random((200, 3))
    for kappa in (5.0, 50.0):
        exact = BesselSolution(ProblemParams(kappa, config.lam))
        fd_curl = finite_difference_curl(exact.eval_E, pts, 1e-5)
        curl = exact.eval_curlE(pts)
        worst_curl = max(worst_curl, float(np.abs(fd_curl - curl).max() / np.abs(curl).max()))
        fd_f = finite_difference_curl(exact.eval_curlE, pts, 1e-4) - kappa ** 2 * exact.eval_E(pts)
        f = exact.eval_f(pts)
        worst_f = max(worst_f, float(np.abs(fd_f - f).max() / np.abs(f).max()))
    ok = worst_curl <= 1e-5 and worst_f <= 1e-3
    return ok, f"curl 相对误差 {worst_curl:.2e}, f 相对误差 {worst_f:.2e}"


def finite_difference_curl(field, points, step):
    """Central-difference curl of a vector field given as a callable on (n, 3) points."""
    D = np.empty((len(points), 3, 3), dtype=complex)
    for d in range(3):
        shift = np.zeros(3)
        shift[d] = step
        D[:, :, d] = (field(points + shift) - field(points - shift)) / (2.0 * step)
    return np.stack([D[:, 2, 1] - D[:, 1, 2], D[:, 0, 2] - D[:, 2, 0], D[:, 1, 0] - D[:, 0, 1]], axis=1)


def _rate_verdict(label, expected, fitted, tail, tol=0.3):
    """
    Judge a fitted convergence slope.

    The fit over the whole mesh list decides; when it misses, the slope over the two
    finest meshes may still pass, since coarse meshes at kappa h > 1 are preasymptotic.

    Returns:
        tuple: (passed, message)
    """
    message = f"{label} 斜率 {fitted:.2f} (最细两网格 {tail:.2f}, 目标 {expected})"
    if abs(fitted - expected) <= tol:
        return True, message
    if abs(tail - expected) <= tol:
        return True, message + " 预渐近"
    return False, message


def _check_convergence_rates(config, rng):
    sweep = replace(config, kind="convergence", kappa_list=[5.0], kappa_min=None, kappa_max=None, csv_path=None)
    failures, notes = [], []
    for p, Ms in ((1, [2, 3, 4, 6, 8]), (2, [2, 3, 4, 6, 8]), (3, [2, 3, 4])):
        records = StudyRunner.run_convergence_study(replace(sweep, p_list=[p], M_list=Ms))
        rate = convergence_rates(records)[(p, 5.0)]
        finest = records[-1]
        for label, expected, key in (("能量", p, "energy_sol"), ("L2", p + 1, "l2_sol")):
            passed, message = _rate_verdict(f"p={p} {label}", expected, rate[key], rate[key + "_tail"])
            (notes if passed else failures).append(message)
        if not finest.rel_energy_sol <= 1.5 * finest.rel_energy_interp:
            failures.append(f"p={p} 最细网格误差比 {finest.rel_energy_sol / finest.rel_energy_interp:.2f}")
    return not failures, "; ".join(failures or notes)


def _check_pollution_growth(config, rng):
    sweep = replace(config, kind="pollution", kappa_list=[10.0, 20.0], kappa_min=None, kappa_max=None,
                    nlambda_target=10.0, csv_path=None)
    growth = {}
    for p in (1, 2):
        r10, r20 = StudyRunner.run_pollution_study(replace(sweep, p_list=[p]))
        growth[p] = (r20.rel_energy_sol / r10.rel_energy_sol, r20.rel_energy_interp / r10.rel_energy_interp)
    ok = (1.3 <= growth[1][0] <= 3.0 and 0.7 <= growth[1][1] <= 1.4 and growth[2][0] < growth[1][0])
    return ok, (f"p=1 增长 {growth[1][0]:.2f} (插值 {growth[1][1]:.2f}), p=2 增长 {growth[2][0]:.2f}")


def _check_stability(config, rng):
    sweep = replace(config, kind="stability", p_list=[1], kappa_list=[5.0, 10.0, 20.0], kappa_min=None,
                    kappa_max=None, nlambda_target=12.0, csv_path=None)
    ratios = [r.stab_ratio for r in StudyRunner.run_stability_study(sweep)]
    spread = max(ratios) / min(ratios)
    return spread <= 3.0, f"比值 {', '.join(f'{r:.3g}' for r in ratios)}, 最大/最小 {spread:.2f}"


def _check_determinism(config, rng):
    runs = []
    for workers in (1, 1, 2):
        local = replace(config, workers=workers)
        result = run_case(1, 2, 5.0, local, workers=workers, keep=True)
        runs.append((result.system.A, result.record.comparable_row()))
    A0, row0 = runs[0]
    same = all(np.array_equal(A.data, A0.data) and np.array_equal(A.indices, A0.indices)
               and np.array_equal(A.indptr, A0.indptr) and _rows_equal(row, row0) for A, row in runs[1:])
    return same, "矩阵与 CSV 行逐位一致" if same else "重复运行结果不一致"


def _rows_equal(a, b):
    return all((x == y) or (isinstance(x, float) and isinstance(y, float) and math.isnan(x) and math.isnan(y))
               for x, y in zip(a, b))


ACCEPTANCE_CHECKS = (
    ("dof_formula", _check_dof_formula, False),
    ("entity_counts", _check_entity_counts, False),
    ("duality_and_reproduction", _check_duality_reproduction, False),
    ("tangential_continuity", _check_tangential_continuity, False),
    ("matrix_identities", _check_matrix_identities, False),
    ("polynomial_patch_test", _check_patch_test, False),
    ("manufactured_data", _check_manufactured_data, False),
    ("convergence_rates", _check_convergence_rates, True),
    ("pollution_growth", _check_pollution_growth, True),
    ("stability_bound", _check_stability, True),
    ("determinism", _check_determinism, False),
)


class StudyRunner:
    """Study drivers; each takes a StudyConfig and an optional progress_callback(percent)."""

    @staticmethod
    def run_pollution_study(config, progress_callback=None):
        """
        Errors at fixed DOFs per wavelength over a kappa sweep, one row per (p, kappa).

        Returns:
            list[StudyRecord]
        """
        config.validate()
        cases = []
        for p in config.p_list:
            for kappa in config.kappas():
                M = choose_M_for_target_nlambda(kappa, p, config.nlambda_target, config.max_M)
                cases.append((p, M, kappa))
        logger.info(f"污染实验: {len(cases)} 个算例, N_lambda={config.nlambda_target}")
        records = _run_cases(cases, config, progress_callback)
        if config.csv_path:
            write_records(config.csv_path, records, "pollution")
        return records

    @staticmethod
    def run_convergence_study(config, progress_callback=None):
        """
        Errors under mesh refinement for every (p, kappa, M).

        Returns:
            list[StudyRecord]
        """
        config.validate()
        cases = [(p, M, kappa) for p in config.p_list for kappa in config.kappas() for M in config.M_list]
        logger.info(f"收敛实验: {len(cases)} 个算例")
        records = _run_cases(cases, config, progress_callback)
        for (p, kappa), rate in convergence_rates(records).items():
            logger.info(f"拟合斜率 p={p} kappa={kappa:g}: 能量 {rate['energy_sol']:.2f} "
                        f"(插值 {rate['energy_interp']:.2f}), L2 {rate['l2_sol']:.2f}")
        if config.csv_path:
            write_records(config.csv_path, records, "convergence")
        return records

    @staticmethod
    def run_stability_study(config, progress_callback=None):
        """
        Stability quotient over a kappa list, M matched to the N_lambda target.

        Returns:
            list[StudyRecord]
        """
        config.validate()
        cases = []
        for p in config.p_list:
            for kappa in config.kappas():
                cases.append((p, choose_M_for_target_nlambda(kappa, p, config.nlambda_target, config.max_M), kappa))
        records = _run_cases(cases, config, progress_callback)
        ratios = [r.stab_ratio for r in records if not r.flagged]
        if ratios:
            logger.info(f"稳定性比值范围: [{min(ratios):.4g}, {max(ratios):.4g}], "
                        f"最大/最小 = {max(ratios) / min(ratios):.3g}")
        if config.csv_path:
            write_records(config.csv_path, records, "stability")
        return records

    @staticmethod
    def run_single(config, progress_callback=None):
        """
        Single solve for the first (p, M, kappa) of the configuration, with optional exports.

        Returns:
            CaseResult
        """
        config.validate()
        p, M, kappa = config.p_list[0], config.M_list[0], config.kappas()[0]
        result = run_case(p, M, kappa, config, keep=True)
        if progress_callback:
            progress_callback(80)
        if config.csv_path:
            write_records(config.csv_path, [result.record], "convergence")
        if config.vtk_path and result.solution is not None:
            write_vtk(config.vtk_path, result.space.mesh,
                      cell_magnitudes(result.space, result.solution, result.exact))
        if config.matrix_path:
            write_matrix_market(config.matrix_path, result.system.A,
                                comment=f"p={p} M={M} kappa={kappa} lambda={config.lam}")
        if progress_callback:
            progress_callback(100)
        return result

    @staticmethod
    def run_acceptance(config=None, quick=False, progress_callback=None):
        """
        Run the acceptance checks in order.

        Args:
            config: StudyConfig supplying solver options, lambda and seed
            quick: Skip the long-running experiment checks
            progress_callback: Optional callable taking a percentage

        Returns:
            list[AcceptanceResult]: `passed` is None for skipped checks
        """
        config = config or StudyConfig(kind="acceptance")
        rng = np.random.default_rng(config.seed)
        results = []
        for index, (name, check, slow) in enumerate(ACCEPTANCE_CHECKS, start=1):
            if quick and slow:
                results.append(AcceptanceResult(name, None, "已跳过 (--quick)"))
            else:
                start = time.perf_counter()
                try:
                    passed, detail = check(config, rng)
                except Exception as e:
                    logger.error(f"验收项 {name} 出错: {e}")
                    passed, detail = False, f"异常: {e}"
                results.append(AcceptanceResult(name, bool(passed), detail, time.perf_counter() - start))
                logger.info(f"验收项 {index} {name}: {'通过' if passed else '失败'} - {detail}")
            if progress_callback:
                progress_callback(int(100 * index / len(ACCEPTANCE_CHECKS)))
        return results
