import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fourbar_synth.kinematics import (
    ALL_CONFIGS,
    CRANK_RANGE,
    T_MATRIX,
    TWO_PI,
    FoldingError,
    InputRange,
    LinkageDims,
    ResultNotValidLinkage,
    TypeConfig,
    Unreachable,
    circle_intersection_output,
    classify,
    dims_from_t,
    input_range,
    is_valid,
    loop_closure_residual,
    radical,
    simulate_cycle,
    simulate_many,
    solve_output,
    t_params,
    wrap_angle,
)

from .helpers import random_linkage, random_valid_r, reachable_input

# ---- T map -------------------------------------------------------------------


def test_t_params_formula():
    assert tuple(t_params((1.0, 1.0, 1.0, 1.0))) == (0.0, 0.0, 0.0, 4.0)
    t = t_params((1.0, 2.0, 3.0, 4.0))
    assert t == (1 - 2 + 3 - 4, 1 - 2 - 3 + 4, -1 - 2 + 3 + 4, 10)


def test_dims_from_t_unit():
    assert dims_from_t((0.0, 0.0, 0.0, 4.0)) == (1.0, 1.0, 1.0, 1.0)


def test_dims_from_t_matches_linear_solve():
    t = np.array([1.0, 1.0, 1.0, 5.0])
    expected = np.linalg.solve(T_MATRIX, t)
    assert np.allclose(dims_from_t(t), expected, rtol=0, atol=1e-14)


def test_dims_from_t_rejects_invalid():
    with pytest.raises(ResultNotValidLinkage):
        dims_from_t((6.0, 0.5, 0.5, 1.0))


def test_t_matrix_orthogonal():
    assert np.array_equal(T_MATRIX.T @ T_MATRIX, 4 * np.eye(4))


@given(st.lists(st.floats(0.05, 10.0), min_size=4, max_size=4))
def test_t_round_trip(r):
    back = dims_from_t(t_params(r)) if is_valid(r) else None
    if back is not None:
        assert np.allclose(back, r, rtol=1e-13, atol=1e-13)
        assert t_params(r).t4 > 0


def test_round_trip_random_1000():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        r = random_valid_r(rng)
        assert np.allclose(dims_from_t(t_params(r)), r, rtol=0, atol=1e-12)


# ---- classification ----------------------------------------------------------


@pytest.mark.parametrize(
    "r, expected",
    [
        ((0.78543, 2.62035, 2.98265, 3.60855), 3),
        ((1.63001, 4.72686, 1.83387, 2.08299), 5),
        ((3.15884, 1.55958, 1.63900, 3.16858), 1),
        # two published example linkages whose printed labels are swapped
        # relative to the sign table; the sign table wins
        ((2.39072, 2.43180, 2.77589, 3.20339), 8),
        ((3.02590, 1.94110, 2.94831, 2.86078), 1),
    ],
)
def test_classify_examples(r, expected):
    assert classify(r) == expected


def test_classify_folding():
    with pytest.raises(FoldingError):
        classify((1.0, 1.0, 1.0, 1.0))


def test_classify_fold_tol_boundary():
    # T1 = 1e-7 is folding at the default tolerance and fine at a smaller one
    r = dims_from_t((1e-7, 1.0, 1.0, 5.0))
    with pytest.raises(FoldingError):
        classify(r)
    assert classify(r, fold_tol=1e-9) == 1


def test_type_config_metadata():
    assert len(set(ALL_CONFIGS)) == 16
    assert TypeConfig(1, 1).signs == (1, 1, 1)
    assert TypeConfig(3, -1).signs == (-1, -1, 1)
    assert TypeConfig(5, 1).signs == (-1, -1, -1)
    assert TypeConfig(8, 1).signs == (-1, 1, 1)
    assert {c.type_id for c in ALL_CONFIGS if c.crank_input} == {1, 3}
    assert TypeConfig.parse(2, "-") == TypeConfig(2, -1)
    with pytest.raises(ValueError):
        TypeConfig(9, 1)
    with pytest.raises(ValueError):
        TypeConfig(1, 0)


def test_classify_round_trip_from_signs():
    rng = np.random.default_rng(2)
    for cfg in ALL_CONFIGS[::2]:
        for _ in range(200):
            r = random_linkage(cfg, rng)
            assert classify(r) == cfg.type_id


# ---- position solve ----------------------------------------------------------


def test_parallelogram_examples():
    r = (2.0, 1.0, 2.0, 1.0)
    assert solve_output(r, math.pi / 2, -1) == pytest.approx(math.pi / 2, abs=1e-14)
    assert solve_output(r, math.pi / 2, 1) == pytest.approx(2 * math.atan(-3.0), abs=1e-14)
    # both agree with the circle-intersection oracle's joint positions
    assert circle_intersection_output(r, math.pi / 2, -1) == pytest.approx(math.pi / 2, abs=1e-14)
    assert circle_intersection_output(r, math.pi / 2, 1) == pytest.approx(math.atan2(-0.6, 1.2 - 2.0), abs=1e-14)


def test_unreachable_input():
    r = (1.0, 3.0, 1.0, 1.5)
    # |A O4| = 2 at theta_in = 0 lies in [r3 - r4, r3 + r4], so that input is fine;
    # at pi it is 4 > r3 + r4 and no branch exists
    assert radical(r, 0.0) > 0
    assert radical(r, math.pi) < 0
    for branch in (1, -1):
        solve_output(r, 0.0, branch)
        with pytest.raises(Unreachable):
            solve_output(r, math.pi, branch)


def test_residual_example():
    assert loop_closure_residual((2.0, 1.0, 2.0, 1.0), math.pi / 2, 0.0) == pytest.approx(math.sqrt(10) - 2, abs=1e-15)


def test_residual_homogeneous():
    r = (2.0, 1.0, 2.0, 1.0)
    base = loop_closure_residual(r, 0.7, 0.2)
    assert loop_closure_residual(tuple(3.5 * x for x in r), 0.7, 0.2) == pytest.approx(3.5 * base, rel=1e-12)


def test_linear_case_c_equals_a():
    # r1 = r2 = 1, r3 = r4 at theta_in = pi/2 gives A = C = 2
    r = (1.0, 1.0, 1.5, 1.5)
    th = math.pi / 2
    for branch in (1, -1):
        out = solve_output(r, th, branch)
        assert math.isfinite(out)
        assert loop_closure_residual(r, th, out) <= 1e-12 * sum(r)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_loop_closure_and_oracle_property(seed):
    rng = np.random.default_rng(seed)
    cfg = ALL_CONFIGS[seed % 16]
    r = random_linkage(cfg, rng)
    th = reachable_input(r, cfg, rng)
    for branch in (1, -1):
        out = solve_output(r, th, branch)
        assert -math.pi < out <= math.pi
        assert loop_closure_residual(r, th, out) <= 1e-9 * sum(r)
        assert abs(wrap_angle(out - circle_intersection_output(r, th, branch))) <= 1e-9


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
def test_scale_invariance(seed, k):
    rng = np.random.default_rng(seed)
    cfg = ALL_CONFIGS[seed % 16]
    r = random_linkage(cfg, rng)
    th = reachable_input(r, cfg, rng)
    rk = tuple(k * x for x in r)
    if radical(r, th) > 1e-9 * sum(r) ** 4:
        for branch in (1, -1):
            assert abs(wrap_angle(solve_output(rk, th, branch) - solve_output(r, th, branch))) <= 1e-9


def test_branch_distinct_where_radical_positive():
    rng = np.random.default_rng(3)
    for i in range(500):
        cfg = ALL_CONFIGS[i % 16]
        r = random_linkage(cfg, rng)
        th = reachable_input(r, cfg, rng)
        if radical(r, th) > 1e-6 * sum(r) ** 4:
            assert abs(wrap_angle(solve_output(r, th, 1) - solve_output(r, th, -1))) > 1e-9


def test_wrap_angle_range():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-0.5) == -0.5


# ---- input range -------------------------------------------------------------


def test_crank_types_full_range():
    rng = np.random.default_rng(4)
    for cfg in ALL_CONFIGS:
        if cfg.crank_input:
            assert input_range(random_linkage(cfg, rng), cfg) == CRANK_RANGE


def _bisect_root(f, a, b, iters=80):
    fa = f(a)
    for _ in range(iters):
        m = 0.5 * (a + b)
        if (f(m) >= 0) == (fa >= 0):
            a, fa = m, f(m)
        else:
            b = m
    return 0.5 * (a + b)


def _sweep_limits(r, probe):
    """Reachable arc containing ``probe`` found by a radical-sign sweep, then bisection."""
    f = lambda th: radical(r, th)
    step = TWO_PI / 20000
    grid = probe + step * np.arange(1, 20001)
    vals = np.array([f(t) for t in grid])
    hi_idx = int(np.argmax(vals < 0))
    hi = _bisect_root(f, grid[hi_idx - 1] if hi_idx else probe, grid[hi_idx])
    grid = probe - step * np.arange(1, 20001)
    vals = np.array([f(t) for t in grid])
    lo_idx = int(np.argmax(vals < 0))
    lo = _bisect_root(f, grid[lo_idx - 1] if lo_idx else probe, grid[lo_idx])
    return lo, hi


def test_rocker_range_matches_sweep_oracle():
    rng = np.random.default_rng(5)
    rocker = [c for c in ALL_CONFIGS if not c.crank_input]
    for i in range(1000):
        cfg = rocker[i % len(rocker)]
        r = random_linkage(cfg, rng)
        ir = input_range(r, cfg)
        mid = 0.5 * (ir.theta_min + ir.theta_max)
        lo, hi = _sweep_limits(r, mid) if i < 60 else (None, None)
        if lo is not None:
            assert abs(lo - ir.theta_min) <= 1e-6 and abs(hi - ir.theta_max) <= 1e-6
        # inside strictly reachable, limits are dead centres
        for th in np.linspace(ir.theta_min, ir.theta_max, 11)[1:-1]:
            assert radical(r, th) >= 0
        for lim in (ir.theta_min, ir.theta_max):
            a = abs(wrap_angle(solve_output(r, lim, 1) - solve_output(r, lim, -1)))
            assert a <= 1e-6


def test_input_range_leg_and_clamp():
    ir = InputRange(False, 0.5, 2.0)
    assert ir.leg(1.0) == 0
    assert ir.leg(1.0 + TWO_PI) == 1
    with pytest.raises(Unreachable):
        ir.leg(3.0)
    assert ir.clamp(2.5) == 2.0
    assert ir.clamp(1.0) == 1.0


# ---- cycle simulation --------------------------------------------------------


def test_simulate_cycle_crank_passthrough():
    rng = np.random.default_rng(6)
    cfg = TypeConfig(1, -1)
    r = random_linkage(cfg, rng)
    assert simulate_cycle(r, cfg, 0.3) == solve_output(r, 0.3, -1)


def test_simulate_cycle_return_leg_flips_branch():
    rng = np.random.default_rng(7)
    for cfg in ALL_CONFIGS:
        if cfg.crank_input:
            continue
        r = random_linkage(cfg, rng)
        ir = input_range(r, cfg)
        mid = 0.5 * (ir.theta_min + ir.theta_max)
        assert simulate_cycle(r, cfg, mid) == solve_output(r, mid, cfg.inversion)
        assert simulate_cycle(r, cfg, TWO_PI + mid) == pytest.approx(solve_output(r, mid, -cfg.inversion), abs=1e-12)
        with pytest.raises(Unreachable):
            simulate_cycle(r, cfg, ir.theta_max + 0.5 * (TWO_PI - ir.span))


def test_simulate_many_matches_scalar():
    rng = np.random.default_rng(8)
    for cfg in ALL_CONFIGS:
        r = random_linkage(cfg, rng)
        ir = input_range(r, cfg)
        phis = [reachable_input(r, cfg, rng, cycle=True) for _ in range(10)]
        assert simulate_many(r, cfg, phis, ir) == [simulate_cycle(r, cfg, p, ir) for p in phis]


def test_cycle_continuous_across_dead_centre():
    """Output is continuous where the forward leg hands over to the return leg."""
    rng = np.random.default_rng(9)
    for cfg in ALL_CONFIGS:
        if cfg.crank_input:
            continue
        r = random_linkage(cfg, rng)
        ir = input_range(r, cfg)
        end_fwd = simulate_cycle(r, cfg, ir.theta_max)
        start_ret = simulate_cycle(r, cfg, ir.theta_max + TWO_PI)
        assert abs(wrap_angle(end_fwd - start_ret)) <= 1e-5


def test_linkage_dims_helpers():
    d = LinkageDims(1.0, 2.0, 3.0, 4.0)
    assert d.total == 10.0
    assert d.scaled(2.0) == (2.0, 4.0, 6.0, 8.0)
