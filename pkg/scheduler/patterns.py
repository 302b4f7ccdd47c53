"""
给药模式
"<on>/<cycle>d" 形式的周期模式，事后给药日分配、容量、疗程长度与剂量强度
"""

import math
import re
from typing import List, Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

_PATTERN_RE = re.compile(r"^\s*(\d+)\s*/\s*(\d+)\s*d\s*$")


class Pattern(BaseModel):
    """每 cycle_length 天中连续 days_on 天给药"""
    model_config = ConfigDict(frozen=True)

    days_on: int = Field(..., ge=1, description="每周期给药天数")
    cycle_length: int = Field(..., ge=1, description="周期长度 (天)")

    @model_validator(mode="after")
    def _check(self) -> "Pattern":
        if self.days_on > self.cycle_length:
            raise ValueError(
                f"days_on 不能大于 cycle_length: {self.days_on} > {self.cycle_length}"
            )
        return self

    @property
    def label(self) -> str:
        return f"{self.days_on}/{self.cycle_length}d"

    def __str__(self) -> str:
        return self.label


def parse_pattern(label: str) -> Pattern:
    """
    解析 "21/28d" 这样的模式标签

    Args:
        label: 模式文本

    Returns:
        Pattern
    """
    match = _PATTERN_RE.match(label or "")
    if not match:
        parts = (label or "").split("/")
        if len(parts) != 2:
            token = label
        elif not re.fullmatch(r"\s*\d+\s*", parts[0]):
            token = parts[0]
        else:
            token = parts[1]
        raise ValueError(f"无法解析给药模式 '{label}': 非法片段 '{token}' (应为 <on>/<cycle>d)")
    days_on, cycle = int(match.group(1)), int(match.group(2))
    if days_on < 1 or days_on > cycle:
        raise ValueError(f"无法解析给药模式 '{label}': 需要 1 ≤ {days_on} ≤ {cycle}")
    return Pattern(days_on=days_on, cycle_length=cycle)


def expand_pattern(p: Pattern, n: int, start_day: int = 0) -> List[int]:
    """
    模式的前 n 个给药日

    Args:
        p: 给药模式
        n: 给药次数
        start_day: 首次给药日

    Returns:
        严格递增的给药日列表
    """
    if n < 1:
        raise ValueError(f"n 至少为 1: {n}")
    return [start_day + (k // p.days_on) * p.cycle_length + k % p.days_on for k in range(n)]


def capacity(p: Pattern, horizon_T: float, start_day: int = 0) -> int:
    """
    所有给药日都早于 T 时的最大给药次数

    Args:
        p: 给药模式
        horizon_T: 终止时间 T
        start_day: 首次给药日
    """
    span = horizon_T - start_day
    if span <= 0:
        raise ValueError(f"horizon_T 必须大于 start_day: {horizon_T} <= {start_day}")
    full, rest = divmod(span, p.cycle_length)
    return int(full) * p.days_on + min(p.days_on, math.ceil(rest))


def duration(times: Sequence[float]) -> float:
    """疗程长度，按首末给药日计入 (last - first + 1)"""
    if not times:
        raise ValueError("times 不能为空")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("times 必须严格递增")
    return times[-1] - times[0] + 1


def dose_intensity(total: float, times: Sequence[float]) -> float:
    """剂量强度 = 累计剂量 / 疗程长度 (mg/m²/天)"""
    return total / duration(times)
