#!/usr/bin/env python3
"""
Maxwell 棱单元求解器 - 命令行界面

功能：
1. 单次求解 (solve)
2. 污染效应 / 收敛性 / 稳定性实验 (study)
3. 验收测试 (acceptance)
"""
import sys
import os
import argparse
import logging
from dataclasses import replace
from typing import List, Optional

from src.core.config import ConfigError, StudyConfig, load_config
from src.core.logger import setup_logging
from src.core.study import StudyError, StudyRunner, convergence_rates

logger = logging.getLogger(__name__)


def _int_list(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _print_progress(percent: int) -> None:
    print(f"\r进度: {percent:3d}%", end="", flush=True)
    if percent >= 100:
        print()


class MaxwellRunner:
    """命令行各子命令的执行类"""

    def __init__(self, base: Optional[StudyConfig] = None):
        self.base = base or StudyConfig()

    def _config(self, args, kind: str) -> StudyConfig:
        """合并配置文件与命令行参数 (命令行优先)"""
        overrides = {"kind": kind}
        mapping = {
            "p": "p_list", "M": "M_list", "kappa": "kappa_list", "kappa_min": "kappa_min",
            "kappa_max": "kappa_max", "kappa_steps": "kappa_steps", "nlambda": "nlambda_target",
            "lam": "lam", "csv": "csv_path", "vtk": "vtk_path", "matrix_market": "matrix_path",
            "workers": "workers", "max_M": "max_M", "max_dofs": "max_dofs", "seed": "seed",
        }
        for arg, attr in mapping.items():
            value = getattr(args, arg, None)
            if value is not None:
                overrides[attr] = value
        if getattr(args, "kappa", None) is not None:
            overrides.setdefault("kappa_min", None)
            overrides.setdefault("kappa_max", None)

        solver = self.base.solver
        if getattr(args, "solver", None) is not None:
            solver = replace(solver, method=args.solver)
        if getattr(args, "solver_tol", None) is not None:
            solver = replace(solver, tol=args.solver_tol)
        quadrature = self.base.quadrature
        if getattr(args, "quad_degree", None) is not None:
            quadrature = replace(quadrature, assembly_degree=args.quad_degree, error_degree=args.quad_degree)
        return replace(self.base, solver=solver, quadrature=quadrature, **overrides).validate()

    def solve(self, args) -> int:
        config = self._config(args, "single")
        config.csv_path = args.out
        print(f"开始求解: p={config.p_list[0]}, M={config.M_list[0]}, kappa={config.kappas()[0]}")
        result = StudyRunner.run_single(config)
        r = result.record
        print(f"  自由度: {r.dof}, N_lambda = {r.nlambda:.4g}, 相对残差: {r.residual:.3e}")
        print(f"  相对能量误差: 解 {r.rel_energy_sol:.4e}, 插值 {r.rel_energy_interp:.4e}")
        print(f"  相对 L2 误差: 解 {r.rel_l2_sol:.4e}, 插值 {r.rel_l2_interp:.4e}")
        print(f"  稳定性比值: {r.stab_ratio:.4g}")
        if r.flagged:
            print("❌ 结果无效: 残差超过阈值或求解失败")
            return 1
        for path in (config.csv_path, config.vtk_path, config.matrix_path):
            if path:
                print(f"✅ 已写入: {path}")
        print("✅ 求解完成")
        return 0

    def study(self, args) -> int:
        config = self._config(args, args.kind)
        runners = {
            "pollution": StudyRunner.run_pollution_study,
            "convergence": StudyRunner.run_convergence_study,
            "stability": StudyRunner.run_stability_study,
        }
        print(f"开始 {args.kind} 实验: p={config.p_list}, kappa={[round(k, 4) for k in config.kappas()]}")
        records = runners[args.kind](config, progress_callback=_print_progress)
        flagged = sum(r.flagged for r in records)
        for r in records:
            mark = "❌" if r.flagged else "✅"
            print(f"{mark} p={r.p} M={r.M} kappa={r.kappa:.4g} N_lambda={r.nlambda:.3g} "
                  f"能量误差 {r.rel_energy_sol:.3e} (插值 {r.rel_energy_interp:.3e}) 稳定性 {r.stab_ratio:.3g}")
        if args.kind == "convergence":
            for (p, kappa), rate in convergence_rates(records).items():
                print(f"  斜率 p={p} kappa={kappa:g}: 能量 {rate['energy_sol']:.2f}, L2 {rate['l2_sol']:.2f}")
        if config.csv_path:
            print(f"✅ 结果已写入: {config.csv_path} (及 {os.path.splitext(config.csv_path)[0]}.gp)")
        print(f"\n实验完成: {len(records) - flagged}/{len(records)} 个算例有效")
        return 0 if flagged == 0 else 1

    def acceptance(self, args) -> int:
        config = replace(self.base, kind="acceptance")
        if args.seed is not None:
            config.seed = args.seed
        results = StudyRunner.run_acceptance(config, quick=args.quick)
        failed = 0
        for index, result in enumerate(results, 1):
            if result.passed is None:
                print(f"⏭  {index:2d}. {result.name}: {result.detail}")
                continue
            mark = "✅" if result.passed else "❌"
            failed += not result.passed
            print(f"{mark} {index:2d}. {result.name}: {result.detail} ({result.seconds:.1f}s)")
        print(f"\n验收完成: {failed} 项失败")
        return 0 if failed == 0 else 1


def _add_problem_args(parser, single: bool) -> None:
    if single:
        parser.add_argument("--p", type=lambda s: [int(s)], help="多项式阶数 (1, 2, 3)")
        parser.add_argument("--M", type=lambda s: [int(s)], help="每个方向的网格数")
        parser.add_argument("--kappa", type=lambda s: [float(s)], help="波数")
    else:
        parser.add_argument("--p", type=_int_list, help="多项式阶数列表，如 1,2,3")
        parser.add_argument("--M", type=_int_list, help="网格数列表，如 2,3,4,6,8")
        parser.add_argument("--kappa", type=_float_list, help="波数列表，如 5,50")
        parser.add_argument("--kappa-min", dest="kappa_min", type=float, help="波数扫描下限")
        parser.add_argument("--kappa-max", dest="kappa_max", type=float, help="波数扫描上限")
        parser.add_argument("--kappa-steps", dest="kappa_steps", type=int, help="波数扫描点数 (对数等距)")
        parser.add_argument("--nlambda", type=float, help="每波长自由度目标值")
        parser.add_argument("--csv", help="输出 CSV 文件")
        parser.add_argument("--workers", type=int, help="并行线程数")
        parser.add_argument("--max-M", dest="max_M", type=int, help="M 上限")
    parser.add_argument("--lambda", dest="lam", type=float, help="阻抗常数 lambda (默认 1)")
    parser.add_argument("--quad-degree", dest="quad_degree", type=int, help="固定积分阶数")
    parser.add_argument("--solver", choices=["lu", "gmres"], help="线性求解器")
    parser.add_argument("--solver-tol", dest="solver_tol", type=float, help="求解器容差")
    parser.add_argument("--max-dofs", dest="max_dofs", type=int, help="自由度上限")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Maxwell 棱单元求解器 - 命令行界面")
    parser.add_argument("-v", "--verbose", action="store_true", help="输出调试日志")
    parser.add_argument("--no-log-file", action="store_true", help="不写日志文件")
    parser.add_argument("--config", help="JSON 配置文件")
    subparsers = parser.add_subparsers(dest="command", help="可用命令")

    # 单次求解
    solve_parser = subparsers.add_parser("solve", help="组装并求解一个算例")
    _add_problem_args(solve_parser, single=True)
    solve_parser.add_argument("--out", help="输出单行 CSV 文件")
    solve_parser.add_argument("--vtk", help="输出 VTK 文件 (单元上的 |E_h|)")
    solve_parser.add_argument("--matrix-market", dest="matrix_market", help="输出 Matrix Market 矩阵文件")

    # 实验
    study_parser = subparsers.add_parser("study", help="运行数值实验")
    kinds = study_parser.add_subparsers(dest="kind", help="实验类型")
    for kind, help_text in (("pollution", "固定 N_lambda 下误差随波数的变化"),
                            ("convergence", "网格加密下的收敛性"),
                            ("stability", "稳定性比值随波数的变化")):
        _add_problem_args(kinds.add_parser(kind, help=help_text), single=False)

    # 验收
    acceptance_parser = subparsers.add_parser("acceptance", help="运行验收测试")
    acceptance_parser.add_argument("--quick", action="store_true", help="跳过耗时的实验项")
    acceptance_parser.add_argument("--seed", type=int, help="随机种子")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """主函数"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command or (args.command == "study" and not args.kind):
        parser.print_help()
        return 1

    setup_logging(logging.DEBUG if args.verbose else logging.INFO, log_to_file=not args.no_log_file)

    try:
        base = load_config(args.config) if args.config else StudyConfig()
        if args.command == "study" and args.kind == "stability" and args.nlambda is None and not args.config:
            base.nlambda_target = 12.0
        runner = MaxwellRunner(base)
        if args.command == "solve":
            return runner.solve(args)
        if args.command == "study":
            return runner.study(args)
        return runner.acceptance(args)
    except (ConfigError, StudyError, ValueError) as e:
        logger.error(f"参数错误: {e}")
        print(f"❌ 错误: {e}")
        return 1
    except Exception as e:
        logger.exception(f"运行失败: {e}")
        print(f"❌ 错误: 运行失败 - {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
