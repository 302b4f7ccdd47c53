"""
测试共享夹具: 替莫唑胺 / 高级别胶质瘤参考参数
"""

import sys
from pathlib import Path

import pytest

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from optim import DoseBounds  # noqa: E402
from pkpd import DrugPK, TumorModel  # noqa: E402
from scheduler import parse_pattern  # noqa: E402
from treatment import RunConfig  # noqa: E402

CONFIG_DIR = project_root / "configs"


@pytest.fixture
def pk() -> DrugPK:
    return DrugPK.temozolomide()


@pytest.fixture
def tm() -> TumorModel:
    return TumorModel.high_grade_glioma()


@pytest.fixture
def bounds() -> DoseBounds:
    return DoseBounds(d_min=100.0, d_max=200.0, cumulative_D=5750.0)


@pytest.fixture
def run_cfg() -> RunConfig:
    return RunConfig.temozolomide()


@pytest.fixture
def target(run_cfg):
    return run_cfg.target()


@pytest.fixture
def five_of_28():
    return parse_pattern("5/28d")


@pytest.fixture
def reference_config_path() -> Path:
    return CONFIG_DIR / "temozolomide.conf"
