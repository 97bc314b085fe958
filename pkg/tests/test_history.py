import pytest

from src.history import DatabaseError, HistoryError, RunLedger


@pytest.fixture
async def ledger(tmp_path):
    async with RunLedger(str(tmp_path / "db" / "runs.db"), max_history=5) as runs:
        yield runs


async def test_add_and_fetch_newest_first(ledger):
    first = await ledger.add_run('run', 'ok', 0, scenario='fig3_fixed_recommendation', seed=7, config_digest='abc',
                                 output_dir='out', timestamp=100, extra={'policies': ['fixed']})
    second = await ledger.add_run('verify', 'failed', 3, timestamp=200)

    runs, total = await ledger.get_runs()
    assert total == 2
    assert [item['id'] for item in runs] == [second, first]

    item = await ledger.get_run(first)
    assert item['command'] == 'run'
    assert item['seed'] == 7
    assert item['extra'] == {'policies': ['fixed']}
    assert item['exit_code'] == 0
    assert await ledger.get_run(9999) is None


async def test_seed_keeps_full_u64_range(ledger):
    seed = 2 ** 64 - 1
    record_id = await ledger.add_run('run', 'ok', 0, seed=seed, timestamp=1)
    assert (await ledger.get_run(record_id))['seed'] == seed


async def test_paging_and_command_filter(ledger):
    for ts in range(4):
        await ledger.add_run('sweep' if ts % 2 else 'run', 'ok', 0, timestamp=ts)

    page, total = await ledger.get_runs(page=2, page_size=3)
    assert total == 4
    assert len(page) == 1
    assert page[0]['timestamp'] == 0

    sweeps, total = await ledger.get_runs(command='sweep')
    assert total == 2
    assert {item['command'] for item in sweeps} == {'sweep'}


async def test_history_is_trimmed_to_max(ledger):
    for ts in range(8):
        await ledger.add_run('run', 'ok', 0, timestamp=ts)
    runs, total = await ledger.get_runs()
    assert total == 5
    assert min(item['timestamp'] for item in runs) == 3


async def test_unknown_status_is_rejected(ledger):
    with pytest.raises(HistoryError):
        await ledger.add_run('run', 'weird', 0)


async def test_clear_history(ledger):
    await ledger.add_run('run', 'ok', 0)
    await ledger.add_run('run', 'invalid', 1)
    assert await ledger.clear_history() == 2
    assert await ledger.get_runs() == ([], 0)


async def test_database_error_is_a_history_error():
    assert issubclass(DatabaseError, HistoryError)
