"""
实验配置模块

Dataclasses describing solver options, the quadrature policy and a whole
study, plus JSON load/save so a run can be reproduced from a file.
"""

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional

logger = logging.getLogger(__name__)

STUDY_KINDS = ("pollution", "convergence", "stability", "single", "acceptance")
SOLVER_METHODS = ("lu", "gmres")


class ConfigError(ValueError):
    """Raised for unreadable or inconsistent configuration."""


@dataclass
class SolverOptions:
    method: str = "lu"
    tol: float = 1e-10
    residual_gate: float = 1e-9
    restart: int = 100
    max_iterations: int = 5000
    pivot_threshold: float = 0.1

    def validate(self):
        if self.method not in SOLVER_METHODS:
            raise ConfigError(f"未知求解器 '{self.method}'，可选: {', '.join(SOLVER_METHODS)}")
        if self.tol <= 0 or self.residual_gate <= 0:
            raise ConfigError("求解器容差必须为正数")
        if self.restart < 1 or self.max_iterations < 1:
            raise ConfigError("GMRES restart/max_iterations 必须为正整数")


@dataclass
class QuadraturePolicy:
    """
    Quadrature degrees used for assembly, loads and error norms.

    The matrix degree defaults to 2p+2. Loads, interpolation and error
    norms integrate oscillatory data and use max(2p+2, ceil(2*kappa*h)+2p)
    unless `error_degree` pins a value.
    """
    assembly_degree: Optional[int] = None
    error_degree: Optional[int] = None
    max_degree: int = 100

    def matrix_degree(self, p):
        return self.assembly_degree if self.assembly_degree else 2 * p + 2

    def data_degree(self, p, kappa, h):
        if self.error_degree:
            return self.error_degree
        degree = max(2 * p + 2, math.ceil(2.0 * kappa * h) + 2 * p)
        if degree > self.max_degree:
            logger.warning(f"积分阶数 {degree} 超过上限，截断为 {self.max_degree} (kappa={kappa}, h={h:.4g})")
            degree = self.max_degree
        return degree


@dataclass
class StudyConfig:
    kind: str = "single"
    p_list: List[int] = field(default_factory=lambda: [1])
    kappa_list: List[float] = field(default_factory=lambda: [5.0])
    kappa_min: Optional[float] = None
    kappa_max: Optional[float] = None
    kappa_steps: int = 8
    nlambda_target: float = 10.0
    M_list: List[int] = field(default_factory=lambda: [2])
    lam: float = 1.0
    solver: SolverOptions = field(default_factory=SolverOptions)
    quadrature: QuadraturePolicy = field(default_factory=QuadraturePolicy)
    csv_path: Optional[str] = None
    vtk_path: Optional[str] = None
    matrix_path: Optional[str] = None
    max_M: int = 64
    max_dofs: int = 300_000
    seed: int = 0
    workers: int = 1

    def kappas(self):
        """The kappa values of the study, expanding a min/max sweep if one is set."""
        if self.kappa_min is not None and self.kappa_max is not None:
            if self.kappa_steps < 2:
                return [float(self.kappa_min)]
            # 对数等距，与污染图的横轴一致
            ratio = (self.kappa_max / self.kappa_min) ** (1.0 / (self.kappa_steps - 1))
            return [float(self.kappa_min * ratio ** i) for i in range(self.kappa_steps)]
        return [float(k) for k in self.kappa_list]

    def validate(self):
        if self.kind not in STUDY_KINDS:
            raise ConfigError(f"未知实验类型 '{self.kind}'")
        if not self.p_list:
            raise ConfigError("p 列表不能为空")
        for p in self.p_list:
            if p not in (1, 2, 3):
                raise ConfigError(f"不支持的多项式阶数 p={p}")
        kappas = self.kappas()
        if not kappas:
            raise ConfigError("kappa 列表不能为空")
        if any(k <= 0 for k in kappas):
            raise ConfigError(f"kappa 必须为正数: {kappas}")
        if self.kappa_min is not None and self.kappa_max is not None and self.kappa_min > self.kappa_max:
            raise ConfigError("kappa_min 不能大于 kappa_max")
        if self.kind in ("convergence", "single") and not self.M_list:
            raise ConfigError("M 列表不能为空")
        if any(M < 1 for M in self.M_list):
            raise ConfigError(f"M 必须 >= 1: {self.M_list}")
        if self.nlambda_target <= 0:
            raise ConfigError("N_lambda 目标值必须为正数")
        if self.lam <= 0:
            raise ConfigError("阻抗常数 lambda 必须为正数")
        if self.workers < 1:
            raise ConfigError("workers 必须 >= 1")
        self.solver.validate()
        return self


def _from_dict(cls, data, where):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where} 中存在未知字段: {', '.join(sorted(unknown))}")
    return cls(**data)


def config_from_dict(data):
    """
    Build a StudyConfig from a plain dictionary (as read from JSON).

    Args:
        data: Dictionary with StudyConfig fields; `solver` and `quadrature`
              may be nested dictionaries

    Returns:
        StudyConfig: Validated configuration
    """
    data = dict(data)
    solver = _from_dict(SolverOptions, data.pop("solver", {}) or {}, "solver")
    quadrature = _from_dict(QuadraturePolicy, data.pop("quadrature", {}) or {}, "quadrature")
    config = _from_dict(StudyConfig, data, "config")
    config.solver = solver
    config.quadrature = quadrature
    return config.validate()


def load_config(config_file):
    """
    加载配置文件

    Args:
        config_file: JSON 配置文件路径

    Returns:
        StudyConfig: 配置对象
    """
    if not os.path.exists(config_file):
        raise ConfigError(f"配置文件不存在: {config_file}")
    try:
        with open(config_file, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (json.JSONDecodeError, IOError) as e:
        raise ConfigError(f"无法读取配置文件 {config_file}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"配置文件顶层必须是对象: {config_file}")
    logger.debug(f"已加载配置: {config_file}")
    return config_from_dict(data)


def save_config(config, config_file):
    """
    保存配置文件

    Args:
        config: StudyConfig 对象
        config_file: 输出 JSON 路径
    """
    with open(config_file, 'w', encoding='utf-8') as f:
        json.dump(asdict(config), f, indent=2, ensure_ascii=False)
