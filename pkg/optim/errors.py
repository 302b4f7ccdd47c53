"""
优化问题异常
"""


class InfeasibleError(ValueError):
    """可行集为空，或 N 不在允许窗口内"""

    def __init__(self, message: str, condition: str):
        """
        Args:
            message: 错误说明
            condition: 失败的条件 (H1, H2, capacity, d_min, d_max)
        """
        super().__init__(message)
        self.condition = condition
