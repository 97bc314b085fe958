import pytest

from src.verification import (_line_row, epsilon_suite, limits_suite, monotonicity_suite, oracle_equivalence_suite,
                              run_suites)


def _by_property(rows):
    return {row['property']: row for row in rows}


@pytest.mark.slow
def test_oracle_equivalence_suite_passes():
    rows = oracle_equivalence_suite(samples=30, blocks=12)
    assert all(row['status'] == 'pass' for row in rows), [r for r in rows if r['status'] != 'pass']
    by_property = _by_property(rows)
    for kind in ('fixed', 'decreasing', 'adaptive_decreasing'):
        assert by_property[f'oracle_equivalence_{kind}']['max_error'] <= 1e-9
    assert 'convexity_identity' in by_property


def test_monotonicity_suite_passes_with_expected_failures_reported():
    rows = monotonicity_suite()
    assert all(row['pass'] for row in rows), [r for r in rows if not r['pass']]
    properties = {row['property'] for row in rows}
    assert {'alpha_monotone_fixed', 'alpha_monotone_decreasing', 'alpha_monotone_adaptive',
            'i_monotone_fixed', 'i_concave_fixed', 'T0_monotone_fixed',
            'kappa_monotone_decreasing', 'tau_monotone_adaptive'} <= properties

    xfail = [row for row in rows if row['expected'] == 'xfail']
    assert {row['property'] for row in xfail} == {'i_monotone_transient_decreasing', 'i_monotone_transient_adaptive'}
    for row in xfail:
        if row['status'] == 'xfail':
            assert row['counterexample'] is not None


def test_strict_line_tolerates_saturated_tail():
    # 固定策略 Υ 在双精度下 i=3 起相邻值完全相等
    row = _line_row('i_monotone_fixed', {}, [1, 2, 3, 4], [0.6874969, 0.6874999, 0.6875, 0.6875], +1, strict=True)
    assert row['status'] == 'pass'
    assert row['counterexample'] is None


def test_strict_line_rejects_flat_first_step_and_later_drop():
    flat = _line_row('i_monotone_fixed', {}, [1, 2, 3], [0.5, 0.5, 0.6], +1, strict=True)
    assert flat['status'] == 'fail'
    assert flat['counterexample']['at'] == [1, 2]

    drop = _line_row('i_monotone_fixed', {}, [1, 2, 3], [0.1, 0.5, 0.4], +1, strict=True)
    assert drop['status'] == 'fail'
    assert drop['counterexample']['at'] == [2, 3]


def test_fixed_block_line_passes_over_long_horizon():
    rows = monotonicity_suite({'blocks': list(range(1, 13))})
    row = _by_property(rows)['i_monotone_fixed']
    assert row['status'] == 'pass', row


@pytest.mark.slow
def test_limits_suite_passes():
    rows = limits_suite()
    assert all(row['status'] == 'pass' for row in rows), [r for r in rows if r['status'] != 'pass']
    by_property = _by_property(rows)
    assert by_property['limit_opinion_fixed']['counterexample'] is None
    assert len([p for p in by_property if p.startswith('limit_opinion_')]) == 3
    assert len([p for p in by_property if p.startswith('limit_utility_')]) == 4


@pytest.mark.slow
def test_epsilon_suite_passes():
    rows = epsilon_suite()
    assert all(row['status'] == 'pass' for row in rows), [r for r in rows if r['status'] != 'pass']
    assert _by_property(rows)['epsilon1_condition']['epsilon1'] > 0.0


async def test_run_suites_tags_rows_with_suite():
    report = await run_suites(['monotonicity'])
    assert report['passed'] is True
    assert report['suites'] == ['monotonicity']
    assert {row['suite'] for row in report['rows']} == {'monotonicity'}


async def test_run_suites_rejects_unknown_suite():
    with pytest.raises(KeyError):
        await run_suites(['nonexistent'])
