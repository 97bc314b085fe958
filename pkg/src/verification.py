"""
验证套件模块 - 闭式与暴力递推的等价性、单调性、极限与 ε₁ 构造

每个套件返回若干行报告 {property, grid_line, status, pass, expected, counterexample}。
status 取 pass / fail / xfail / xpass：xfail 表示已知不成立的性质确实不成立，
不计为失败；xpass 表示预期不成立的性质在该网格上意外成立。
"""

import logging
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .dynamics import DynamicsParams, validate_params
from .oracle import (
    HypothesisViolated,
    InvalidBoundary,
    adaptive_beats_fixed_threshold,
    adaptive_limit_utility,
    brute_force_block_opinions,
    fixed_imitation_drift_tolerance,
    limit_agent_utility,
    limit_opinion,
    measure_adaptive_boundary,
    skip_one_click_drift_tolerance,
    skip_one_click_limit_utility,
    upsilon_adaptive,
    upsilon_decreasing,
    upsilon_fixed,
)
from .payoffs import RewardFn, agent_utility
from .policies.agent import BlockGeometry, make_agent_policy
from .policies.platform import FixedRecommendation
from .simulation import OpinionTrace, run
from .utils import fan_out

logger = logging.getLogger(__name__)

EQUIVALENCE_TOL = 1e-9
CONVEXITY_TOL = 1e-12
MONOTONE_SLACK = 1e-12
LIMIT_OPINION_TOL = 1e-3
LIMIT_UTILITY_TOL = 1e-2
BOUND_TOL = 1e-9

# 基准参数（数值实验默认值）
BASE_ALPHA = 0.25
BASE_BETA = 0.2
BASE_S = 8
BASE_X0 = -1.0
BASE_U0 = 1.0
BASE_KAPPA = 2
BASE_TAU = 3
BASE_X_DRIFT = 0.1
BASE_LAMBDA = 0.5
LIMIT_HORIZON = 10_000
# ε₁ 构造需要固定策略极限效用非负，基准参数下 λ = 0.5 不满足
EPSILON_LAMBDA = 0.8

# 满足整除精确性条件的 (T0, κ)，s = 8
EXACT_DECREASING_PAIRS = ((8, 2), (4, 2), (8, 4), (8, 8), (6, 3), (1, 2), (2, 2))

DEFAULT_MONOTONICITY_GRID = {
    'beta': BASE_BETA,
    's': BASE_S,
    'alphas': [0.2, 0.25, 0.3, 0.35, 0.4, 0.5, 0.6, 0.7],
    'blocks': [1, 2, 3, 4, 5, 6],
    'kappas': [2, 4, 8],
    'taus': [1, 2, 3],
    'adaptive_m_AD': 3,
}


def _row(prop: str, grid_line: Dict[str, Any], ok: bool, counterexample: Optional[Dict[str, Any]] = None,
         expected: str = 'pass', **extra) -> Dict[str, Any]:
    if expected == 'xfail':
        status = 'xpass' if ok else 'xfail'
    else:
        status = 'pass' if ok else 'fail'
    row = {
        'property': prop,
        'grid_line': grid_line,
        'status': status,
        'pass': status != 'fail',
        'expected': expected,
        'counterexample': None if ok else counterexample,
    }
    row.update(extra)
    return row


def _baseline_params() -> DynamicsParams:
    return validate_params(BASE_ALPHA, BASE_BETA)


# ---------------------------------------------------------------- 等价性

def _sample_tuple(rng: np.random.Generator):
    beta = float(rng.uniform(0.01, 0.5))
    alpha = float(rng.uniform(beta, 1.0 - beta))
    x0 = float(rng.uniform(-1.0, 1.0))
    u0 = float(rng.uniform(-1.0, 1.0))
    return validate_params(alpha, beta), x0, u0


def oracle_equivalence_suite(samples: int = 200, blocks: int = 12, seed: int = 20240101,
                             tolerance: float = EQUIVALENCE_TOL) -> List[Dict[str, Any]]:
    """
    在随机抽取的合法 (α, β, x0, u0) 上比较闭式区块观点与高精度逐步递推

    自适应策略的 m_AD 由仿真测得；测得的点击步数序列不规则时跳过该组并补抽。
    """
    rng = np.random.default_rng(seed)
    s = BASE_S
    geometry = BlockGeometry(s, blocks)
    worst = {'fixed': 0.0, 'decreasing': 0.0, 'adaptive_decreasing': 0.0}
    failures: Dict[str, Optional[Dict[str, Any]]] = {k: None for k in worst}
    convexity_fail = bounds_fail = recurrence_fail = None
    accepted = skipped = 0

    while accepted < samples:
        if skipped > 20 * samples:
            raise RuntimeError(f"等价性抽样跳过过多 ({skipped})，请检查参数范围")
        params, x0, u0 = _sample_tuple(rng)
        T0_fixed = int(rng.integers(0, s + 1))
        T0_dec, kappa = EXACT_DECREASING_PAIRS[int(rng.integers(len(EXACT_DECREASING_PAIRS)))]
        tau = int(rng.integers(1, 4))
        x_drift = float(rng.uniform(0.05, 0.5))
        try:
            m_AD, _ = measure_adaptive_boundary(params, s, s, tau, x_drift, x0, u0, blocks)
        except InvalidBoundary as e:
            skipped += 1
            logger.warning(f"跳过不规则的自适应样本: {e}")
            continue
        accepted += 1

        cases = {
            'fixed': (make_agent_policy('fixed', geometry, T0_fixed),
                      lambda i: upsilon_fixed(params, s, T0_fixed, i)),
            'decreasing': (make_agent_policy('decreasing', geometry, T0_dec, kappa=kappa),
                           lambda i: upsilon_decreasing(params, s, T0_dec, kappa, i)),
            'adaptive_decreasing': (make_agent_policy('adaptive_decreasing', geometry, s, tau=tau, x_drift=x_drift),
                                    lambda i: upsilon_adaptive(params, s, s, tau, i, m_AD)),
        }
        for kind, (policy, closed_form) in cases.items():
            oracle = brute_force_block_opinions(params, policy, u0, x0, blocks)
            previous = None
            for i in range(blocks + 1):
                weight = closed_form(i)
                error = abs(weight.opinion(x0, u0) - oracle[i])
                detail = {'alpha': params.alpha, 'beta': params.beta, 'x0': x0, 'u0': u0, 'i': i,
                          'policy': policy.to_dict(), 'closed_form': weight.opinion(x0, u0), 'oracle': oracle[i]}
                if kind == 'adaptive_decreasing':
                    detail['m_AD'] = m_AD
                worst[kind] = max(worst[kind], error)
                if error > tolerance and failures[kind] is None:
                    failures[kind] = detail
                if abs(weight.gamma + weight.upsilon - 1.0) > CONVEXITY_TOL and convexity_fail is None:
                    convexity_fail = detail
                if not (0.0 <= weight.upsilon <= 1.0 and 0.0 <= weight.gamma <= 1.0) and bounds_fail is None:
                    bounds_fail = detail
                if (kind == 'decreasing' and previous is not None and weight.phase.value == 'steady_state'
                        and previous.phase.value == 'steady_state'):
                    expected_next = params.B ** s * previous.upsilon
                    if abs(weight.upsilon - expected_next) > CONVEXITY_TOL and recurrence_fail is None:
                        recurrence_fail = detail
                previous = weight

    grid_line = {'samples': samples, 'blocks': [0, blocks], 'seed': seed, 'skipped': skipped}
    rows = [
        _row(f'oracle_equivalence_{kind}', grid_line, failures[kind] is None, failures[kind], max_error=worst[kind])
        for kind in worst
    ]
    rows.append(_row('convexity_identity', grid_line, convexity_fail is None, convexity_fail))
    rows.append(_row('weight_bounds', grid_line, bounds_fail is None, bounds_fail))
    rows.append(_row('decreasing_steady_recurrence', grid_line, recurrence_fail is None, recurrence_fail))
    logger.info(f"等价性套件完成: 接受 {accepted} 组, 跳过 {skipped} 组")
    return rows


# ---------------------------------------------------------------- 单调性

def _first_violation(values: Sequence[float], direction: int, strict: bool = False) -> Optional[int]:
    """
    direction=+1 检查非降，-1 检查非增；返回第一个违反处的下标

    strict 只要求首个增量超过 MONOTONE_SLACK：几何级数收敛后相邻值在双精度下
    会完全相等（固定策略的 Υ 在 i≥3 即饱和），其后只按非严格单调检查。
    """
    for idx in range(1, len(values)):
        delta = direction * (values[idx] - values[idx - 1])
        if delta < -MONOTONE_SLACK:
            return idx
        if strict and idx == 1 and delta <= MONOTONE_SLACK:
            return idx
    return None


def _line_row(prop: str, grid_line: Dict[str, Any], xs: Sequence[Any], values: Sequence[float],
              direction: int, strict: bool = False, expected: str = 'pass') -> Dict[str, Any]:
    bad = _first_violation(values, direction, strict)
    counterexample = None
    if bad is not None:
        counterexample = {'at': [xs[bad - 1], xs[bad]], 'values': [values[bad - 1], values[bad]]}
    return _row(prop, grid_line, bad is None, counterexample, expected)


def _concave_row(prop: str, grid_line: Dict[str, Any], xs: Sequence[Any], values: Sequence[float],
                 expected: str = 'pass') -> Dict[str, Any]:
    diffs = [values[k + 1] - values[k] for k in range(len(values) - 1)]
    return _line_row(prop, grid_line, xs[1:], diffs, -1, expected=expected)


def monotonicity_suite(grid: Optional[Dict[str, Any]] = None) -> List[Dict[str, Any]]:
    """
    区块权重 Υ 的单调性

    对每个性质沿一条网格线计算闭式并检查方向；过渡阶段 Υ 关于 i 单调凹增的说法
    与闭式本身矛盾（首块点击步数最大，随后各块的增量更小，Υ 先升后降），这两行标记为 xfail。
    """
    grid = dict(DEFAULT_MONOTONICITY_GRID, **(grid or {}))
    beta, s = grid['beta'], grid['s']
    T0 = s
    rows = []

    alphas = [a for a in grid['alphas'] if a >= beta and a + beta <= 1.0]
    for i in grid['blocks']:
        params_line = [validate_params(a, beta) for a in alphas]
        base = {'beta': beta, 's': s, 'T0': T0, 'i': i, 'alpha': alphas}
        rows.append(_line_row('alpha_monotone_fixed', base, alphas,
                              [upsilon_fixed(p, s, T0, i).upsilon for p in params_line], -1, strict=True))
        rows.append(_line_row('alpha_monotone_decreasing', dict(base, kappa=BASE_KAPPA), alphas,
                              [upsilon_decreasing(p, s, T0, BASE_KAPPA, i).upsilon for p in params_line], -1))
        m_AD = grid['adaptive_m_AD']
        rows.append(_line_row('alpha_monotone_adaptive', dict(base, tau=BASE_TAU, m_AD=m_AD), alphas,
                              [upsilon_adaptive(p, s, T0, BASE_TAU, i, m_AD).upsilon for p in params_line], -1))

    params = validate_params(BASE_ALPHA, beta)
    blocks = list(grid['blocks'])
    base = {'alpha': BASE_ALPHA, 'beta': beta, 's': s, 'T0': T0, 'i': blocks}

    fixed_line = [upsilon_fixed(params, s, T0, i).upsilon for i in blocks]
    rows.append(_line_row('i_monotone_fixed', base, blocks, fixed_line, +1, strict=True))
    rows.append(_concave_row('i_concave_fixed', base, blocks, fixed_line))

    m_D = upsilon_decreasing(params, s, T0, BASE_KAPPA, 1).boundaries.m_D
    transient = [i for i in range(1, m_D + 1)]
    dec_transient = [upsilon_decreasing(params, s, T0, BASE_KAPPA, i).upsilon for i in transient]
    rows.append(_line_row('i_monotone_transient_decreasing', dict(base, kappa=BASE_KAPPA, i=transient),
                          transient, dec_transient, +1, expected='xfail'))
    steady = [m_D + k for k in range(1, 6)]
    rows.append(_line_row('i_monotone_steady_decreasing', dict(base, kappa=BASE_KAPPA, i=steady), steady,
                          [upsilon_decreasing(params, s, T0, BASE_KAPPA, i).upsilon for i in steady], -1))

    m_AD = grid['adaptive_m_AD']
    ad_transient = list(range(1, m_AD + 1))
    rows.append(_line_row('i_monotone_transient_adaptive', dict(base, tau=BASE_TAU, m_AD=m_AD, i=ad_transient),
                          ad_transient, [upsilon_adaptive(params, s, T0, BASE_TAU, i, m_AD).upsilon
                                         for i in ad_transient], +1, expected='xfail'))

    T0s = list(range(0, s + 1))
    for i in (1, 3, 6):
        rows.append(_line_row('T0_monotone_fixed', {'alpha': BASE_ALPHA, 'beta': beta, 's': s, 'i': i, 'T0': T0s},
                              T0s, [upsilon_fixed(params, s, t, i).upsilon for t in T0s], +1))

    kappas = list(grid['kappas'])
    for i in (1, 2):
        rows.append(_line_row('kappa_monotone_decreasing', dict(base, i=i, kappa=kappas), kappas,
                              [upsilon_decreasing(params, s, T0, k, i).upsilon for k in kappas], -1))

    taus = list(grid['taus'])
    for i in (1, 2, 3):
        rows.append(_line_row('tau_monotone_adaptive', dict(base, i=i, tau=taus, m_AD=i), taus,
                              [upsilon_adaptive(params, s, T0, t, i, max(i, 1)).upsilon for t in taus], -1))

    zero_line = [upsilon_fixed(params, s, 0, i).upsilon for i in blocks]
    rows.append(_row('T0_zero_degenerate', dict(base, T0=0), all(v == 0.0 for v in zero_line),
                     {'values': zero_line}))
    logger.info(f"单调性套件完成: {len(rows)} 行")
    return rows


# ---------------------------------------------------------------- 极限

def _long_run(params: DynamicsParams, kind: str, horizon: int = LIMIT_HORIZON,
              **policy_kwargs) -> OpinionTrace:
    geometry = BlockGeometry(BASE_S, horizon // BASE_S)
    policy = make_agent_policy(kind, geometry, policy_kwargs.pop('T0', BASE_S), **policy_kwargs)
    unit = RewardFn('constant', value=1.0)
    return run(params, policy, FixedRecommendation(BASE_U0), (unit, unit), BASE_X0, geometry, 0)


def limits_suite(horizon: int = LIMIT_HORIZON) -> List[Dict[str, Any]]:
    """长视界仿真与无限视界极限、极限效用的对照"""
    params = _baseline_params()
    lam = BASE_LAMBDA
    unit = RewardFn('constant', value=1.0)
    grid = {'alpha': BASE_ALPHA, 'beta': BASE_BETA, 's': BASE_S, 'x0': BASE_X0, 'u0': BASE_U0,
            'horizon': horizon, 'lambda': lam}
    rows = []

    fixed = _long_run(params, 'fixed', horizon=horizon)
    decreasing = _long_run(params, 'decreasing', horizon=horizon, kappa=BASE_KAPPA)
    adaptive = _long_run(params, 'adaptive_decreasing', horizon=horizon, tau=BASE_TAU, x_drift=BASE_X_DRIFT)
    reduction = _long_run(params, 'adaptive_decreasing', horizon=horizon, tau=BASE_S, x_drift=1e-6)

    for prop, kind, trace, tol, extra in (
            ('limit_opinion_fixed', 'fixed', fixed, LIMIT_OPINION_TOL, {}),
            ('limit_opinion_decreasing', 'decreasing', decreasing, LIMIT_OPINION_TOL, {'kappa': BASE_KAPPA}),
            ('limit_opinion_adaptive', 'adaptive_decreasing', adaptive, BOUND_TOL,
             {'tau': BASE_TAU, 'x_drift': BASE_X_DRIFT})):
        bound = limit_opinion(kind, params, BASE_X0, BASE_U0, BASE_X_DRIFT)
        final = trace.final_opinion
        rows.append(_row(prop, dict(grid, **extra), bound.contains(final, tol),
                         {'final_opinion': final, 'limit': [bound.low, bound.high]}))

    final = reduction.final_opinion
    rows.append(_row('adaptive_reduction_to_innate', dict(grid, tau=BASE_S, x_drift=1e-6),
                     abs(final - BASE_X0) <= 1e-6, {'final_opinion': final}))

    for prop, kind, trace, tol in (
            ('limit_utility_fixed', 'fixed', fixed, LIMIT_UTILITY_TOL),
            ('limit_utility_decreasing', 'decreasing', decreasing, LIMIT_UTILITY_TOL),
            ('limit_utility_adaptive', 'adaptive_decreasing', adaptive, BOUND_TOL)):
        bound = limit_agent_utility(kind, params, BASE_X0, BASE_U0, lam, BASE_TAU, BASE_X_DRIFT)
        utility = agent_utility(trace, unit, lam)
        rows.append(_row(prop, grid, bound.contains(utility, tol),
                         {'utility': utility, 'limit': [bound.low, bound.high]}))

    T_ss = adaptive.block_boundaries[-1][2]
    expected = adaptive_limit_utility(params, BASE_S, T_ss, lam, BASE_X0, BASE_U0)
    utility = agent_utility(adaptive, unit, lam)
    rows.append(_row('limit_utility_adaptive_schedule', dict(grid, T_ss=T_ss),
                     abs(utility - expected) <= LIMIT_UTILITY_TOL, {'utility': utility, 'expected': expected}))
    logger.info("极限套件完成")
    return rows


# ---------------------------------------------------------------- ε₁

def epsilon_suite(horizon: int = LIMIT_HORIZON, lam: float = EPSILON_LAMBDA,
                  epsilon2: float = 1e-3) -> List[Dict[str, Any]]:
    """跳过一次点击的自适应构造严格优于固定策略"""
    params = _baseline_params()
    unit = RewardFn('constant', value=1.0)
    grid = {'alpha': BASE_ALPHA, 'beta': BASE_BETA, 's': BASE_S, 'x0': BASE_X0, 'u0': BASE_U0,
            'lambda': lam, 'horizon': horizon, 'epsilon2': epsilon2}
    rows = []

    eps1, possible = adaptive_beats_fixed_threshold(params, BASE_S, lam, BASE_X0, BASE_U0)
    rows.append(_row('epsilon1_condition', grid, possible, {'epsilon1': eps1}, epsilon1=eps1))

    fixed_limit = limit_agent_utility('fixed', params, BASE_X0, BASE_U0, lam).low
    x_drift = skip_one_click_drift_tolerance(params, BASE_S, BASE_X0, BASE_U0, epsilon2)
    trace = _long_run(params, 'adaptive_decreasing', horizon=horizon, tau=1, x_drift=x_drift)
    utility = agent_utility(trace, unit, lam)
    expected = skip_one_click_limit_utility(params, BASE_S, lam, BASE_X0, BASE_U0)
    steady_T = trace.block_boundaries[-1][2]
    rows.append(_row('skip_one_click_schedule', dict(grid, x_drift=x_drift), steady_T == BASE_S - 1,
                     {'steady_T': steady_T}))
    rows.append(_row('skip_one_click_utility', dict(grid, x_drift=x_drift),
                     abs(utility - expected) <= LIMIT_UTILITY_TOL and utility > fixed_limit,
                     {'utility': utility, 'expected': expected, 'fixed_limit': fixed_limit}))

    imitation_drift = fixed_imitation_drift_tolerance(params, BASE_X0, BASE_U0, epsilon2)
    imitation = _long_run(params, 'adaptive_decreasing', horizon=horizon, tau=1, x_drift=imitation_drift)
    imitation_utility = agent_utility(imitation, unit, lam)
    rows.append(_row('fixed_imitation_utility', dict(grid, x_drift=imitation_drift),
                     abs(imitation_utility - fixed_limit) <= LIMIT_UTILITY_TOL,
                     {'utility': imitation_utility, 'fixed_limit': fixed_limit}))

    try:
        adaptive_beats_fixed_threshold(params, BASE_S, BASE_LAMBDA, BASE_X0, BASE_U0)
        violated = False
    except HypothesisViolated:
        violated = True
    rows.append(_row('epsilon1_hypothesis_guard', dict(grid, **{'lambda': BASE_LAMBDA}), violated,
                     {'raised': violated}))
    logger.info("ε₁ 套件完成")
    return rows


SUITES: Dict[str, Callable[[], List[Dict[str, Any]]]] = {
    'oracle-equivalence': oracle_equivalence_suite,
    'monotonicity': monotonicity_suite,
    'limits': limits_suite,
    'epsilon': epsilon_suite,
}


def _run_named_suite(name: str) -> List[Dict[str, Any]]:
    return SUITES[name]()


async def run_suites(names: Sequence[str], jobs: int = 1) -> Dict[str, Any]:
    """
    运行选定的套件并汇总报告

    Returns:
        {'suites': [...], 'passed': bool, 'rows': [每行附带 suite 字段]}
    """
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"未知的验证套件: {unknown}")
    results = await fan_out(_run_named_suite, [(name,) for name in names], jobs)
    rows = []
    for name, suite_rows in zip(names, results):
        for row in suite_rows:
            rows.append(dict(row, suite=name))
    failed = [row for row in rows if not row['pass']]
    for row in failed:
        logger.error(f"性质不成立: {row['suite']}/{row['property']} 反例 {row['counterexample']}")
    return {'suites': list(names), 'passed': not failed, 'rows': rows}
