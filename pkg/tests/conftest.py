import pytest

from src.dynamics import validate_params
from src.payoffs import RewardFn
from src.policies.agent import BlockGeometry, make_agent_policy

BASE_X0 = -1.0
BASE_U0 = 1.0


@pytest.fixture(autouse=True)
def isolated_ledger(tmp_path, monkeypatch):
    """运行记录与输出目录都放到临时目录，测试从不写仓库"""
    monkeypatch.setenv("OPINION_LAB_DB_PATH", str(tmp_path / "ledger" / "runs.db"))
    monkeypatch.delenv("OPINION_LAB_OUTPUT_DIR", raising=False)
    return tmp_path / "ledger" / "runs.db"


@pytest.fixture
def baseline_params():
    return validate_params(0.25, 0.2)


@pytest.fixture
def unit_rewards():
    unit = RewardFn('constant', value=1.0)
    return unit, unit


@pytest.fixture
def linear_rewards():
    linear = RewardFn('linear_distance', c=0.1)
    return linear, linear


@pytest.fixture
def make_policy():
    def _make(kind, n=10, s=8, T0=8, **kwargs):
        return make_agent_policy(kind, BlockGeometry(s, n), T0, **kwargs)
    return _make


@pytest.fixture
def scenario_data():
    """fig3_fixed_recommendation 预设的缩短版，供配置与命令行测试改写"""
    return {
        'scenario': {'name': 'short'},
        'dynamics': {'alpha': 0.25, 'beta': 0.2},
        'geometry': {'s': 8, 'n': 6},
        'agent_policies': [
            {'kind': 'fixed', 'T0': 8},
            {'kind': 'decreasing', 'T0': 8, 'kappa': 2},
            {'kind': 'adaptive_decreasing', 'T0': 8, 'tau': 3, 'x_drift': 0.1},
        ],
        'platform': {'kind': 'fixed_recommendation', 'u0': BASE_U0},
        'rewards': {'agent': {'kind': 'linear_distance', 'c': 0.1},
                    'platform': {'kind': 'linear_distance', 'c': 0.1}},
        'lambda': 0.5,
        'x0': BASE_X0,
        'seed': 3,
    }
