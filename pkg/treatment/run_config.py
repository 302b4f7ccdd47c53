"""
运行参数文件
扁平 key = value 文本 (# 注释)，由 python-dotenv 解析，pydantic 校验
"""

from pathlib import Path
from typing import Dict, Optional, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, model_validator

from optim import DoseBounds, PalliativeTarget, SolverConfig
from pkpd import DrugPK, TumorModel
from scheduler import Pattern, parse_pattern
from utils import get_logger

logger = get_logger(__name__)

# 写回文件时的键顺序
_KEY_ORDER = (
    "lambda", "sigma", "k1", "k2", "xi", "l0_rel", "T", "t1",
    "d_min", "d_max", "D", "pattern", "l_star_rel",
    "optimality_tol", "max_iterations", "feasibility_tol",
)


class RunConfig(BaseModel):
    """一次计算的全部输入，键名与参数表符号一致"""
    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    lambda_: float = Field(..., alias="lambda", gt=0, description="清除率 λ (1/day)")
    sigma: float = Field(..., gt=0, description="σ (m²/l)")
    k1: float = Field(..., gt=0, description="k₁")
    k2: float = Field(..., gt=0, description="k₂ (mg/l)")
    xi: float = Field(..., gt=0, description="Gompertz 增长率 ξ")
    l0_rel: float = Field(..., gt=0, lt=1, description="L₀/θ")
    horizon_T: float = Field(..., alias="T", gt=0, description="终止时间 T (天)")
    start_day: int = Field(default=0, alias="t1", ge=0, description="首次给药日 t₁")
    d_min: float = Field(..., gt=0, description="单次剂量下界")
    d_max: float = Field(..., gt=0, description="单次剂量上界")
    cumulative_D: Optional[float] = Field(default=None, alias="D", gt=0, description="累计剂量 D")
    pattern: str = Field(default="5/28d", description="给药模式")
    l_star_rel: Optional[float] = Field(default=None, gt=0, lt=1, description="姑息阈值 L*/θ")
    optimality_tol: Optional[float] = Field(default=None, gt=0)
    max_iterations: Optional[int] = Field(default=None, ge=1)
    feasibility_tol: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _check_downstream(self) -> "RunConfig":
        self.bounds()
        self.schedule_pattern()
        if self.start_day >= self.horizon_T:
            raise ValueError(f"t1 必须早于 T: {self.start_day} >= {self.horizon_T}")
        return self

    def drug(self) -> DrugPK:
        return DrugPK(lambda_=self.lambda_, sigma=self.sigma, k1=self.k1, k2=self.k2)

    def tumor(self) -> TumorModel:
        return TumorModel(xi=self.xi, l0_rel=self.l0_rel)

    def bounds(self) -> DoseBounds:
        return DoseBounds(d_min=self.d_min, d_max=self.d_max, cumulative_D=self.cumulative_D)

    def schedule_pattern(self) -> Pattern:
        return parse_pattern(self.pattern)

    def solver_config(self) -> SolverConfig:
        """全局求解器配置，文件中的覆盖项优先"""
        overrides = {
            key: getattr(self, key)
            for key in ("optimality_tol", "max_iterations", "feasibility_tol")
            if getattr(self, key) is not None
        }
        base = SolverConfig.from_settings()
        return SolverConfig(**{**base.model_dump(), **overrides})

    def target(self) -> PalliativeTarget:
        """姑息阈值，缺少 l_star_rel 时报错"""
        if self.l_star_rel is None:
            raise ValueError("姑息问题需要 l_star_rel")
        return PalliativeTarget.build(self.tumor(), self.drug(), self.horizon_T, self.l_star_rel)

    def with_overrides(self, **changes) -> "RunConfig":
        """返回修改部分字段后的新配置 (重新校验)"""
        data = self.model_dump()
        data.update(changes)
        return RunConfig.model_validate(data)

    def to_text(self) -> str:
        """序列化为 key = value 文本，浮点数用 repr 保证可逆"""
        data = self.model_dump(by_alias=True, exclude_none=True)
        lines = ["# chemo-dosing run config"]
        for key in _KEY_ORDER:
            if key not in data:
                continue
            value = data[key]
            lines.append(f"{key} = {repr(value) if isinstance(value, float) else value}")
        return "\n".join(lines) + "\n"

    def save(self, path: Union[str, Path]) -> Path:
        """写入文件"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text(), encoding="utf-8")
        logger.info(f"配置已写入: {path}")
        return path

    @classmethod
    def temozolomide(cls) -> "RunConfig":
        """替莫唑胺 / 高级别胶质瘤参考配置"""
        return cls(
            lambda_=9.242,
            sigma=4e-3,
            k1=60.0,
            k2=0.36,
            xi=5.51e-3,
            l0_rel=0.25,
            horizon_T=210.0,
            start_day=0,
            d_min=100.0,
            d_max=200.0,
            cumulative_D=5750.0,
            pattern="5/28d",
            l_star_rel=0.1813
        )


def parse_run_config(values: Dict[str, Optional[str]]) -> RunConfig:
    """校验已解析的键值对"""
    return RunConfig.model_validate(dict(values))


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """
    读取参数文件

    Args:
        path: 文件路径

    Returns:
        RunConfig；未知键或非法取值抛出 ValidationError
    """
    path = Path(path)
    if not path.is_file():
        raise ValueError(f"配置文件不存在: {path}")
    values = dotenv_values(path, interpolate=False)
    logger.debug(f"读取配置 {path}: {len(values)} 项")
    return parse_run_config(values)
