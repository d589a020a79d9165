#!/usr/bin/env python3
"""
实验编排单元测试
"""

import math
import os
import shutil
import sys
import tempfile
import unittest
from unittest.mock import patch

import numpy as np
from scipy import io as spio

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core import study
from src.core.analysis import error_norms, field_norms
from src.core.config import StudyConfig
from src.core.exporters import read_csv
from src.core.study import (CSV_HEADER, StudyError, StudyRecord, StudyRunner, choose_M_for_target_nlambda,
                            convergence_rates, fit_rate, nlambda, run_case)

SLOW = os.environ.get("MAXWELL_EEM_SLOW") == "1"


class TestHelpers(unittest.TestCase):

    def test_nlambda(self):
        self.assertAlmostEqual(nlambda(1000, 2 * math.pi), 10.0, places=12)

    def test_choose_M(self):
        self.assertEqual(choose_M_for_target_nlambda(10.0, 1, 10.0), 7)
        self.assertEqual(choose_M_for_target_nlambda(0.1, 1, 10.0), 1)
        previous = 1
        for kappa in (5.0, 10.0, 20.0, 40.0):
            M = choose_M_for_target_nlambda(kappa, 2, 8.0)
            self.assertGreaterEqual(M, previous)
            previous = M
        with self.assertRaises(StudyError):
            choose_M_for_target_nlambda(1000.0, 1, 10.0, max_M=8)
        with self.assertRaises(StudyError):
            choose_M_for_target_nlambda(10.0, 1, 0.0)

    def test_fit_rate(self):
        hs = np.array([0.5, 0.25, 0.125])
        self.assertAlmostEqual(fit_rate(hs, 3.0 * hs ** 2), 2.0, places=12)
        self.assertAlmostEqual(fit_rate(hs, [0.5, float('nan'), 0.125]), 1.0, places=12)
        self.assertTrue(math.isnan(fit_rate([0.5], [0.1])))

    def test_convergence_rates_skip_flagged(self):
        base = dict(p=1, kappa=2.0, lam=1.0, dof=1, nlambda=1.0)
        records = [StudyRecord(M=M, h=h, rel_energy_sol=h, rel_energy_interp=h, rel_l2_sol=h ** 2,
                               rel_l2_interp=h ** 2, **base) for M, h in ((2, 0.5), (4, 0.25))]
        records.append(StudyRecord(M=8, h=0.125, rel_energy_sol=10.0, flagged=True, **base))
        rates = convergence_rates(records)[(1, 2.0)]
        self.assertAlmostEqual(rates["energy_sol"], 1.0, places=12)
        self.assertAlmostEqual(rates["l2_sol"], 2.0, places=12)

    def test_convergence_rates_finest_pair(self):
        base = dict(p=1, kappa=5.0, lam=1.0, dof=1, nlambda=1.0)
        # coarsest row lies off the asymptotic line; rows arrive out of mesh order
        rows = ((8, 0.125, 0.015625), (2, 0.5, 0.1), (4, 0.25, 0.0625))
        records = [StudyRecord(M=M, h=h, rel_energy_sol=h, rel_energy_interp=h, rel_l2_sol=l2,
                               rel_l2_interp=h ** 2, **base) for M, h, l2 in rows]
        rates = convergence_rates(records)[(1, 5.0)]
        self.assertAlmostEqual(rates["l2_sol_tail"], 2.0, places=12)
        self.assertAlmostEqual(rates["energy_sol_tail"], 1.0, places=12)
        self.assertLess(rates["l2_sol"], 1.7)

    def test_rate_verdict(self):
        passed, message = study._rate_verdict("p=1 L2", 2, 1.50, 1.80)
        self.assertTrue(passed)
        self.assertIn("1.50", message)
        self.assertIn("1.80", message)
        self.assertIn("预渐近", message)
        passed, message = study._rate_verdict("p=2 能量", 2, 2.05, 2.00)
        self.assertTrue(passed)
        self.assertNotIn("预渐近", message)
        self.assertFalse(study._rate_verdict("p=1 L2", 2, 1.50, 1.50)[0])
        self.assertFalse(study._rate_verdict("p=1 L2", 2, float('nan'), float('nan'))[0])


class TestRunCase(unittest.TestCase):
    """
    单个算例测试类
    """

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_smallest_case(self):
        record = run_case(1, 1, 5.0).record
        self.assertEqual(record.dof, 38)
        self.assertAlmostEqual(record.nlambda, 2 * math.pi * 38 ** (1 / 3) / 5.0, places=12)
        self.assertAlmostEqual(record.h, math.sqrt(3.0), places=14)
        self.assertFalse(record.flagged)
        self.assertLess(record.residual, 1e-9)
        self.assertTrue(math.isfinite(record.stab_ratio))
        self.assertTrue(math.isfinite(record.rel_energy_sol))
        self.assertEqual(record.matrix_degree, 4)

    def test_deterministic(self):
        first = run_case(2, 2, 4.0).record
        second = run_case(2, 2, 4.0, workers=2).record
        self.assertEqual(first.comparable_row(), second.comparable_row())

    def test_dof_cap(self):
        with self.assertRaises(StudyError):
            run_case(3, 8, 5.0, StudyConfig(max_dofs=1000))

    def test_solver_failure_flags_row(self):
        with patch('src.core.study.solve', side_effect=study.SingularMatrixError("singular", pivot=0)):
            record = run_case(1, 1, 3.0).record
        self.assertTrue(record.flagged)
        self.assertTrue(math.isnan(record.rel_energy_sol))
        self.assertTrue(math.isfinite(record.rel_energy_interp))

    def test_csv_round_trip(self):
        record = run_case(1, 2, 3.0).record
        path = os.path.join(self.temp_dir, "case.csv")
        study.write_records(path, [record], "convergence")
        header, rows = read_csv(path)
        self.assertEqual(tuple(header), CSV_HEADER)
        self.assertEqual(header[:7], ["p", "M", "kappa", "lambda", "dof", "nlambda", "h"])
        restored = StudyRecord.from_row(rows[0])
        self.assertEqual(restored.row(), record.row())
        self.assertTrue(os.path.exists(os.path.join(self.temp_dir, "case.gp")))

    def test_run_single_exports(self):
        config = StudyConfig(p_list=[1], M_list=[2], kappa_list=[3.0],
                             csv_path=os.path.join(self.temp_dir, "single.csv"),
                             vtk_path=os.path.join(self.temp_dir, "single.vtk"),
                             matrix_path=os.path.join(self.temp_dir, "single.mtx"))
        progress = []
        result = StudyRunner.run_single(config, progress_callback=progress.append)
        self.assertEqual(progress, [80, 100])
        self.assertTrue(os.path.exists(config.csv_path))
        with open(config.vtk_path, 'r', encoding='ascii') as f:
            content = f.read()
        self.assertIn("CELLS 48 240", content)
        self.assertIn("SCALARS abs_error double 1", content)
        A = spio.mmread(config.matrix_path)
        self.assertEqual(A.shape, (result.record.dof, result.record.dof))
        self.assertLessEqual(abs(A - result.system.A).max(), 1e-14 * abs(result.system.A).max())


class TestStudies(unittest.TestCase):
    """
    污染、收敛与稳定性实验测试类
    """

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_pollution_study(self):
        progress = []
        config = StudyConfig(kind="pollution", p_list=[1, 2], kappa_list=[2.0, 4.0], nlambda_target=6.0,
                             csv_path=os.path.join(self.temp_dir, "pollution.csv"))
        records = StudyRunner.run_pollution_study(config, progress_callback=progress.append)
        self.assertEqual([(r.p, r.kappa) for r in records], [(1, 2.0), (1, 4.0), (2, 2.0), (2, 4.0)])
        for r in records:
            self.assertGreaterEqual(r.nlambda, 6.0)
            self.assertEqual(r.M, choose_M_for_target_nlambda(r.kappa, r.p, 6.0))
        self.assertEqual(progress[-1], 100)
        _, rows = read_csv(config.csv_path)
        self.assertEqual(len(rows), 4)
        with open(os.path.join(self.temp_dir, "pollution.gp"), 'r', encoding='utf-8') as f:
            self.assertIn("pollution.csv", f.read())

    def test_convergence_study(self):
        config = StudyConfig(kind="convergence", p_list=[1], kappa_list=[2.0], M_list=[1, 2])
        records = StudyRunner.run_convergence_study(config)
        self.assertEqual([r.M for r in records], [1, 2])
        self.assertLess(records[1].rel_energy_interp, records[0].rel_energy_interp)

    def test_threaded_study_keeps_order(self):
        config = StudyConfig(kind="convergence", p_list=[1], kappa_list=[2.0, 3.0], M_list=[1, 2], workers=3)
        progress = []
        records = StudyRunner.run_convergence_study(config, progress_callback=progress.append)
        self.assertEqual([(r.kappa, r.M) for r in records], [(2.0, 1), (2.0, 2), (3.0, 1), (3.0, 2)])
        self.assertEqual(progress, [25, 50, 75, 100])

    def test_stability_study(self):
        config = StudyConfig(kind="stability", p_list=[1], kappa_list=[2.0, 3.0], nlambda_target=6.0)
        records = StudyRunner.run_stability_study(config)
        self.assertEqual(len(records), 2)
        for r in records:
            self.assertGreater(r.stab_ratio, 0.0)
            self.assertTrue(math.isfinite(r.stab_ratio))

    def test_triangle_inequality(self):
        result = run_case(1, 2, 5.0, keep=True)
        params = result.exact.params
        sol = error_norms(result.solution, result.exact).error
        interp = error_norms(result.interpolant, result.exact).error
        gap = field_norms(result.interpolant - result.solution, params)
        self.assertLessEqual(sol.energy, (interp.energy + gap.energy) * (1 + 1e-10))
        self.assertLessEqual(sol.full_energy, (interp.full_energy + gap.full_energy) * (1 + 1e-10))

    @unittest.skipUnless(SLOW, "设置 MAXWELL_EEM_SLOW=1 运行耗时测试")
    def test_galerkin_error_near_interpolation_error(self):
        record = run_case(2, 4, 5.0).record
        self.assertLess(record.rel_energy_sol, 1.5 * record.rel_energy_interp)


class TestAcceptance(unittest.TestCase):
    """
    验收测试流程测试类
    """

    def test_checks_in_order_with_skips(self):
        checks = (
            ("ok", lambda config, rng: (True, "ok"), False),
            ("slow", lambda config, rng: (True, "slow"), True),
            ("bad", lambda config, rng: (False, "bad"), False),
        )
        with patch.object(study, "ACCEPTANCE_CHECKS", checks):
            results = StudyRunner.run_acceptance(quick=True)
        self.assertEqual([r.name for r in results], ["ok", "slow", "bad"])
        self.assertEqual([r.passed for r in results], [True, None, False])

    def test_exception_becomes_failure(self):
        def broken(config, rng):
            raise RuntimeError("boom")

        with patch.object(study, "ACCEPTANCE_CHECKS", (("broken", broken, False),)):
            results = StudyRunner.run_acceptance()
        self.assertFalse(results[0].passed)
        self.assertIn("boom", results[0].detail)

    def test_fast_checks(self):
        fast = tuple(check for check in study.ACCEPTANCE_CHECKS
                     if check[0] in ("dof_formula", "entity_counts", "polynomial_patch_test"))
        with patch.object(study, "ACCEPTANCE_CHECKS", fast):
            results = StudyRunner.run_acceptance(quick=True)
        for result in results:
            self.assertTrue(result.passed, msg=f"{result.name}: {result.detail}")

    @unittest.skipUnless(SLOW, "设置 MAXWELL_EEM_SLOW=1 运行耗时测试")
    def test_quick_acceptance(self):
        results = StudyRunner.run_acceptance(quick=True)
        for result in results:
            if result.passed is not None:
                self.assertTrue(result.passed, msg=f"{result.name}: {result.detail}")


@unittest.skipUnless(SLOW, "设置 MAXWELL_EEM_SLOW=1 运行耗时测试")
class TestSlowExperiments(unittest.TestCase):
    """
    收敛阶、污染增长与稳定性实验测试类
    """

    def setUp(self):
        self.config = StudyConfig(kind="acceptance")
        self.rng = np.random.default_rng(self.config.seed)

    def test_convergence_rates(self):
        passed, detail = study._check_convergence_rates(self.config, self.rng)
        self.assertTrue(passed, msg=detail)

    def test_pollution_growth(self):
        passed, detail = study._check_pollution_growth(self.config, self.rng)
        self.assertTrue(passed, msg=detail)

    def test_stability_spread(self):
        passed, detail = study._check_stability(self.config, self.rng)
        self.assertTrue(passed, msg=detail)


if __name__ == '__main__':
    unittest.main()
