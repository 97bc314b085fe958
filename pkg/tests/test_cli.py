import filecmp
import json
import os
import time

import pandas as pd
import pytest
import yaml

from main import main
from src.config import Config, PRESET_DIR
from src import verification

RUN_FILES = ['summary.csv', 'metadata.json'] + [
    os.path.join(policy, name)
    for policy in ('fixed', 'decreasing', 'adaptive_decreasing')
    for name in ('trace.csv', 'blocks.csv', 'utility_series.csv')
]


@pytest.fixture
def scenario_file(tmp_path, scenario_data):
    def _write(data=None, name='scenario.yaml'):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data or scenario_data), encoding='utf-8')
        return str(path)
    return _write


def _error(capsys):
    lines = [line for line in capsys.readouterr().err.splitlines() if line.strip()]
    return json.loads(lines[-1])


async def test_run_writes_artifacts_and_reruns_from_metadata(tmp_path, scenario_file):
    first = tmp_path / 'first'
    assert await main(['run', '--config', scenario_file(), '--out', str(first)]) == 0
    for name in RUN_FILES:
        assert (first / name).exists(), name

    second = tmp_path / 'second'
    assert await main(['run', '--config', str(first / 'metadata.json'), '--out', str(second)]) == 0
    for name in RUN_FILES:
        assert filecmp.cmp(first / name, second / name, shallow=False), name


async def test_preset_runs_are_byte_identical(tmp_path):
    dirs = [tmp_path / 'a', tmp_path / 'b']
    for out in dirs:
        assert await main(['run', '--preset', 'fig4_explore_periodically', '--out', str(out)]) == 0
    for name in RUN_FILES:
        assert filecmp.cmp(dirs[0] / name, dirs[1] / name, shallow=False), name


async def test_fixed_recommendation_drift_ordering(tmp_path):
    out = tmp_path / "fixed"
    assert await main(['run', '--preset', 'fig3_fixed_recommendation', '--out', str(out)]) == 0
    summary = pd.read_csv(out / 'summary.csv').set_index('policy')
    drift = summary['final_drift']
    assert drift['fixed'] == pytest.approx(1.375)
    assert drift['fixed'] > drift['adaptive_decreasing'] > drift['decreasing']
    assert summary.loc['fixed', 'platform_payoff'] > summary.loc['decreasing', 'platform_payoff']


@pytest.mark.slow
async def test_fixed_recommendation_payoff_ordering(tmp_path):
    out = tmp_path / "fixed"
    assert await main(['run', '--preset', 'fig3_fixed_recommendation', '--out', str(out)]) == 0
    payoff = pd.read_csv(out / 'summary.csv').set_index('policy')['platform_payoff']
    assert payoff['fixed'] >= payoff['adaptive_decreasing'] >= payoff['decreasing']


@pytest.mark.slow
async def test_population_preset_distance_orderings(tmp_path):
    out = tmp_path / "population"
    assert await main(['population', '--preset', 'fig3d_population', '--out', str(out)]) == 0
    distances = pd.read_csv(out / 'distances.csv').set_index('policy')
    fixed, decreasing, adaptive = (distances.loc[p] for p in ('fixed', 'decreasing', 'adaptive_decreasing'))
    assert fixed['w_final_recommendation'] < fixed['w_final_innate']
    assert decreasing['w_final_innate'] < 0.02
    assert adaptive['w_final_innate'] < adaptive['w_final_recommendation']
    assert len(pd.read_csv(out / 'agents.csv')) == 2000


@pytest.mark.slow
async def test_alpha_sweep_preset_orderings(tmp_path):
    out = tmp_path / "alpha"
    assert await main(['sweep', '--preset', 'appendixB_alpha_sweep', '--out', str(out)]) == 0
    table = pd.read_csv(out / 'sweep.csv')
    payoff = table.pivot(index='value', columns='policy', values='platform_payoff')
    assert len(payoff) == 80
    assert (payoff['fixed'] >= payoff['adaptive_decreasing'] - 1e-9).all()
    assert (payoff['adaptive_decreasing'] >= payoff['decreasing'] - 1e-9).all()
    drift = table[table['policy'] == 'decreasing']['final_drift']
    assert drift.abs().max() == pytest.approx(0.0, abs=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(f[:-5] for f in os.listdir(PRESET_DIR) if f.endswith('.yaml')))
async def test_preset_finishes_within_a_minute(tmp_path, name):
    command = Config.from_preset(name).command
    started = time.perf_counter()
    assert await main([command, '--preset', name, '--out', str(tmp_path / name)]) == 0
    assert time.perf_counter() - started < 60.0


async def test_seed_override_is_recorded(tmp_path, scenario_file):
    out = tmp_path / 'seeded'
    assert await main(['run', '--config', scenario_file(), '--seed', '42', '--out', str(out)]) == 0
    metadata = json.loads((out / 'metadata.json').read_text(encoding='utf-8'))
    assert metadata['seed'] == 42


async def test_invalid_params_exit_one(tmp_path, scenario_file, scenario_data, capsys):
    scenario_data['dynamics'] = {'alpha': 0.1, 'beta': 0.2}
    out = tmp_path / 'never'
    assert await main(['run', '--config', scenario_file(scenario_data), '--out', str(out)]) == 1
    error = _error(capsys)
    assert error['invariant'] == 'alpha_ge_beta'
    assert set(error) == {'error', 'invariant', 'message'}
    assert not out.exists()


async def test_missing_config_file_exit_two(tmp_path, capsys):
    assert await main(['run', '--config', str(tmp_path / 'missing.yaml')]) == 2
    assert _error(capsys)['invariant'] == 'io'


async def test_config_source_is_required(capsys):
    assert await main(['sweep']) == 1
    assert _error(capsys)['invariant'] == 'config_source'


async def test_population_count_zero_exit_one(tmp_path, scenario_file, scenario_data, capsys):
    scenario_data['scenario']['command'] = 'population'
    scenario_data['population'] = {'count': 0}
    assert await main(['population', '--config', scenario_file(scenario_data), '--out', str(tmp_path / 'p')]) == 1
    assert _error(capsys)['invariant'] == 'population_count_positive'


async def test_population_and_sweep_artifacts(tmp_path, scenario_file, scenario_data):
    population = dict(scenario_data, scenario={'name': 'pop', 'command': 'population'},
                      population={'count': 12, 'bins': 10})
    out = tmp_path / 'pop'
    assert await main(['population', '--config', scenario_file(population, 'pop.yaml'), '--out', str(out)]) == 0
    distances = pd.read_csv(out / 'distances.csv')
    assert list(distances['policy']) == ['fixed', 'decreasing', 'adaptive_decreasing']
    agents = pd.read_csv(out / 'agents.csv')
    assert len(agents) == 12
    assert pd.read_csv(out / 'histogram_innate.csv')['count'].sum() == 12

    sweep = dict(scenario_data, scenario={'name': 'sw', 'command': 'sweep'},
                 sweep={'parameter': 'x0', 'values': [-1.0, 0.0, 1.0]})
    out = tmp_path / 'sweep'
    assert await main(['sweep', '--config', scenario_file(sweep, 'sweep.yaml'), '--out', str(out)]) == 0
    assert len(pd.read_csv(out / 'sweep.csv')) == 9


async def test_verify_writes_report(tmp_path):
    out = tmp_path / 'verify'
    assert await main(['verify', '--suite', 'monotonicity', '--out', str(out)]) == 0
    report = json.loads((out / 'report.json').read_text(encoding='utf-8'))
    assert report['passed'] is True
    assert report['suites'] == ['monotonicity']


async def test_verify_failure_exit_three(tmp_path, monkeypatch):
    failing = {'property': 'always_fails', 'grid_line': {}, 'status': 'fail', 'pass': False,
               'expected': 'pass', 'counterexample': {'at': 0}}
    monkeypatch.setitem(verification.SUITES, 'limits', lambda: [failing])
    out = tmp_path / 'verify'
    assert await main(['verify', '--suite', 'limits', '--out', str(out)]) == 3
    report = json.loads((out / 'report.json').read_text(encoding='utf-8'))
    assert report['passed'] is False


async def test_unexpected_error_exit_four(tmp_path, monkeypatch, capsys):
    def broken():
        raise RuntimeError("suite crashed")

    monkeypatch.setitem(verification.SUITES, 'limits', broken)
    assert await main(['verify', '--suite', 'limits', '--out', str(tmp_path / 'verify')]) == 4
    error = _error(capsys)
    assert error['error'] == 'RuntimeError'
    assert error['invariant'] == 'internal_error'


async def test_history_lists_recorded_runs(tmp_path, scenario_file, capsys):
    await main(['run', '--config', scenario_file(), '--out', str(tmp_path / 'h')])
    await main(['run', '--config', str(tmp_path / 'missing.yaml')])
    capsys.readouterr()

    assert await main(['history']) == 0
    out = capsys.readouterr().out
    assert 'exit=0' in out
    assert 'exit=2' in out

    assert await main(['history', '--command', 'verify']) == 0
    assert '暂无运行记录' in capsys.readouterr().out

    assert await main(['history', '--clear']) == 0
    assert '已清空 2 条运行记录' in capsys.readouterr().out
