"""
配置管理模块
支持从环境变量和 .env 文件加载全局默认值
"""

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class SolverSettings(BaseSettings):
    """精确求解器默认参数"""
    optimality_tol: float = Field(default=1e-8, gt=0, description="最优性容差 (治愈: 投影梯度残差，姑息: 相对牛顿减量)")
    max_iterations: int = Field(default=5000, gt=0, description="最大迭代次数")
    feasibility_tol: float = Field(default=1e-10, gt=0, description="约束可行性容差 (相对)")

    model_config = SettingsConfigDict(
        env_prefix="SOLVER_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore"
    )


class DiagnosticSettings(BaseSettings):
    """主假设 (MH) 诊断配置"""
    warn_ratio: float = Field(
        default=0.01,
        gt=0,
        description="d_max·e^{-λs}/k̃₂ 超过该值时给出警告"
    )

    model_config = SettingsConfigDict(
        env_prefix="MH_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore"
    )


class ReproduceSettings(BaseSettings):
    """表格复现配置"""
    workers: int = Field(default=4, ge=1, description="按行并行求解的线程数")
    trajectory_step: float = Field(default=0.25, gt=0, description="轨迹采样步长 (天)")

    model_config = SettingsConfigDict(
        env_prefix="REPRODUCE_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore"
    )


class AppSettings(BaseSettings):
    """应用全局配置"""
    debug: bool = Field(default=False, description="调试模式")
    log_level: str = Field(default="INFO", description="日志级别")

    solver: SolverSettings = Field(default_factory=SolverSettings)
    diagnostics: DiagnosticSettings = Field(default_factory=DiagnosticSettings)
    reproduce: ReproduceSettings = Field(default_factory=ReproduceSettings)

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore"
    )


# 全局配置实例
settings = AppSettings()


def get_settings() -> AppSettings:
    """获取配置实例"""
    return settings
