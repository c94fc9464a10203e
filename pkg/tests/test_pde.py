from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from nashpde import (
    ControlSet,
    DiffusionMatrixField,
    GameSpec,
    Grid,
    SolverError,
    builtin_scenario,
    default_resolver,
    expanding_domain_solve,
    growth_check,
    linear_parabolic_solve,
    max_principle_check,
    picard_solve,
    residual,
)
from nashpde.games import _x1, _zero_payoff
from nashpde.pde import ValueField, _spatial_gradients, _terminal_arrays, picard_step


def _drift0(t, x, u1, u2):
    x = np.asarray(x, dtype=np.float64)
    shape = np.broadcast_shapes(x.shape[:-1], np.shape(u1)[:-1], np.shape(u2)[:-1])
    return np.zeros(shape + (x.shape[-1],))


def _half_feedback(t, x, p1, p2, heav):
    return np.full(np.shape(x[..., 0]), 0.5)


def heat_2d_spec(gfun, sigma) -> GameSpec:
    return GameSpec(
        name="diffusion-2d", dim_x=2, horizon=0.5,
        sigma=DiffusionMatrixField.constant(sigma),
        drift=_drift0,
        running_payoff_1=_zero_payoff, running_payoff_2=_zero_payoff,
        terminal_payoff_1=gfun, terminal_payoff_2=gfun,
        control_set_1=ControlSet.interval(0.0, 1.0),
        control_set_2=ControlSet.interval(0.0, 1.0),
        structure="separated", growth_exponent=1.0,
        feedback_closed_form=(_half_feedback, _half_feedback))


# ─── grid mechanics ──────────────────────────────────────────────────────────

def test_grid_spacing_and_levels():
    g = Grid(1, 2.0, 41, 50, 1.0)
    assert g.h == pytest.approx(0.1)
    assert g.dt == pytest.approx(0.02)
    assert g.shape == (41,)
    ax = g.axis()
    assert ax[0] == -2.0 and ax[-1] == 2.0 and ax[20] == 0.0
    np.testing.assert_allclose(g.s_levels()[[0, -1]], [0.0, 1.0])


def test_grid_rejects_bad_parameters():
    with pytest.raises(SolverError):
        Grid(3, 1.0, 11, 10, 1.0)  # only 1-d and 2-d lattices
    with pytest.raises(SolverError):
        Grid(1, 1.0, 10, 10, 1.0)  # even node count loses the origin
    with pytest.raises(SolverError):
        Grid(1, -1.0, 11, 10, 1.0)
    with pytest.raises(SolverError):
        Grid(1, 1.0, 11, 0, 1.0)
    with pytest.raises(SolverError):
        Grid(1, 1.0, 11, 10, 0.0)


def test_2d_nodes_carry_coordinates():
    g = Grid(2, 1.0, 3, 4, 1.0)
    nodes = g.nodes()
    assert nodes.shape == (3, 3, 2)
    np.testing.assert_array_equal(nodes[0, 2], [-1.0, 1.0])
    np.testing.assert_array_equal(nodes[1, 1], [0.0, 0.0])


def test_value_field_shape_guard():
    g = Grid(1, 1.0, 11, 4, 1.0)
    with pytest.raises(SolverError, match="shape"):
        ValueField.from_values(g, np.zeros((5, 11)), np.zeros((4, 11)))


def test_level_lookup_rounds_and_clamps():
    g = Grid(1, 1.0, 11, 10, 1.0)
    f = ValueField.from_values(g, np.zeros((11, 11)), np.zeros((11, 11)))
    assert f.level_of_s(0.0) == 0
    assert f.level_of_s(0.51) == 5
    assert f.level_of_s(1.0) == 10
    assert f.level_of_s(-0.3) == 0
    assert f.level_of_s(7.0) == 10


def test_interpolation_is_exact_on_linear_data():
    lin = builtin_scenario("linear-oracle")
    grid = Grid(1, 3.0, 61, 20, 1.0)
    field, diag = picard_solve(lin, grid, default_resolver(lin))
    assert diag.converged
    for x in (0.123, -2.7, 1.05):
        assert field.value(1, 0.37, [x]) == pytest.approx(x, abs=1e-12)
        assert field.gradient(2, 0.8, [x])[0] == pytest.approx(1.0, abs=1e-10)


def test_physical_time_accessors_invert_the_clock():
    heat = builtin_scenario("heat-oracle")
    grid = Grid(1, math.pi / 2, 41, 20, 1.0)
    field, _ = picard_solve(heat, grid, default_resolver(heat))
    for t in (0.0, 0.35, 1.0):
        assert field.value_phys(1, t, [0.4]) == field.value(1, 1.0 - t, [0.4])


def test_stored_gradients_match_a_recompute():
    lin = builtin_scenario("case2-bangbang")
    grid = Grid(1, 3.0, 61, 40, 1.0)
    field, _ = picard_solve(lin, grid, default_resolver(lin),
                            epsilon_schedule=(0.5,))
    for i in (0, 1):
        np.testing.assert_array_equal(
            field.gradients[i], _spatial_gradients(grid, field.values[i]))


# ─── linear driver ───────────────────────────────────────────────────────────

def test_linear_march_keeps_constants():
    g = Grid(1, 2.0, 21, 10, 1.0)
    a = DiffusionMatrixField.constant([[1.0]])
    levels = g.time_steps + 1
    out = linear_parabolic_solve(
        g, a, np.zeros((levels, 21, 1)), np.zeros((levels, 21)),
        np.full((21,), 3.0))
    np.testing.assert_allclose(out, 3.0, atol=1e-13)


def test_linear_march_validates_field_shapes():
    g = Grid(1, 2.0, 21, 10, 1.0)
    a = DiffusionMatrixField.constant([[1.0]])
    with pytest.raises(SolverError, match="drift_field"):
        linear_parabolic_solve(g, a, np.zeros((3, 21, 1)),
                               np.zeros((11, 21)), np.zeros((21,)))
    with pytest.raises(SolverError, match="source_field"):
        linear_parabolic_solve(g, a, np.zeros((11, 21, 1)),
                               np.zeros((4, 21)), np.zeros((21,)))


def test_advection_stability_guard_names_the_node():
    fast = dataclasses.replace(
        builtin_scenario("linear-oracle"),
        drift=lambda t, x, u1, u2: np.full(np.broadcast_shapes(
            np.shape(x)[:-1], np.shape(u1)[:-1], np.shape(u2)[:-1]) + (1,), 50.0))
    with pytest.raises(SolverError, match="advection time-step bound"):
        picard_solve(fast, Grid(1, 3.0, 31, 10, 1.0), default_resolver(fast))


def test_comparison_a_larger_terminal_payoff_lifts_the_whole_surface():
    heat = builtin_scenario("heat-oracle")
    lifted = dataclasses.replace(
        heat,
        terminal_payoff_1=lambda x: np.cos(_x1(x)) + 0.3,
        terminal_payoff_2=lambda x: np.cos(_x1(x)) + 0.3)
    grid = Grid(1, math.pi / 2, 41, 20, 1.0)
    base, _ = picard_solve(heat, grid, default_resolver(heat))
    high, _ = picard_solve(lifted, grid, default_resolver(lifted))
    assert np.all(high.values[0] >= base.values[0] - 1e-13)
    # a constant shift passes through the linear march untouched
    np.testing.assert_allclose(high.values[0] - base.values[0], 0.3, atol=1e-12)


def test_nonnegative_data_keeps_a_nonnegative_surface():
    heat = builtin_scenario("heat-oracle")  # cos >= 0 on the quarter-wave box
    grid = Grid(1, math.pi / 2, 81, 40, 1.0)
    field, _ = picard_solve(heat, grid, default_resolver(heat))
    assert float(np.min(field.values[0])) >= -1e-14
    assert float(np.min(field.values[1])) >= -1e-14


# ─── nonlinear solve against closed-form references ──────────────────────────

def test_heat_benchmark_value_at_the_origin(heat_solved):
    _, _, field, _ = heat_solved
    # separation of variables: V(s, x) = exp(-s) cos(x)
    assert abs(field.value(1, 1.0, [0.0]) - math.exp(-1.0)) < 1e-3
    got = field.values[0][-1]
    want = np.exp(-1.0) * np.cos(field.grid.axis())
    assert float(np.max(np.abs(got - want))) < 1e-3


def test_heat_fixed_point_needs_exactly_two_sweeps(heat_solved):
    _, _, _, diag = heat_solved
    # the frozen coefficients never depend on the field, so sweep two
    # reproduces sweep one bit for bit
    assert diag.converged
    assert diag.iterations_used == 2
    assert diag.picard_residuals[-1] == (0.0, 0.0)


def test_linear_data_is_reproduced_to_machine_precision():
    lin = builtin_scenario("linear-oracle")
    grid = Grid(1, 3.0, 121, 100, 1.0)
    field, diag = picard_solve(lin, grid, default_resolver(lin))
    want = np.broadcast_to(grid.axis(), field.values[0].shape)
    assert float(np.max(np.abs(field.values[0] - want))) < 1e-12
    assert float(np.max(np.abs(field.values[1] - want))) < 1e-12
    assert diag.converged


def test_error_shrinks_at_first_order_under_joint_refinement():
    heat = builtin_scenario("heat-oracle")
    res = default_resolver(heat)
    errs = []
    for nodes, steps in ((101, 250), (201, 500)):
        field, _ = picard_solve(heat, Grid(1, math.pi / 2, nodes, steps, 1.0), res)
        errs.append(abs(field.value(1, 1.0, [0.0]) - math.exp(-1.0)))
    assert errs[0] / errs[1] >= 1.8


def test_terminal_level_and_box_rim_hold_the_data_exactly():
    c2 = builtin_scenario("case2-bangbang")
    grid = Grid(1, 4.0, 81, 50, 1.0)
    field, _ = picard_solve(c2, grid, default_resolver(c2),
                            epsilon_schedule=(0.5, 0.25))
    g1, g2 = _terminal_arrays(c2, grid)
    np.testing.assert_array_equal(field.values[0][0], g1)
    np.testing.assert_array_equal(field.values[1][0], g2)
    np.testing.assert_array_equal(field.values[0][:, 0], np.full(51, g1[0]))
    np.testing.assert_array_equal(field.values[0][:, -1], np.full(51, g1[-1]))
    np.testing.assert_array_equal(field.values[1][:, 0], np.full(51, g2[0]))
    np.testing.assert_array_equal(field.values[1][:, -1], np.full(51, g2[-1]))


def test_one_extra_sweep_moves_a_converged_field_by_at_most_tol():
    c1 = builtin_scenario("case1-continuous")
    grid = Grid(1, 4.0, 101, 100, 1.0)
    res = default_resolver(c1)
    tol = 1e-6
    field, diag = picard_solve(c1, grid, res, tol=tol)
    assert diag.converged
    terminal = _terminal_arrays(c1, grid)
    values, grads, _ = picard_step(c1, grid, res, field.values, field.gradients,
                                   terminal)
    move = max(float(np.max(np.abs(values[i] - field.values[i]))) for i in (0, 1))
    assert move <= tol


def test_residual_tail_decreases_monotonically():
    c1 = builtin_scenario("case1-continuous")
    grid = Grid(1, 4.0, 101, 100, 1.0)
    _, diag = picard_solve(c1, grid, default_resolver(c1), tol=1e-6)
    tail = [max(pair) for pair in diag.picard_residuals[-5:]]
    assert all(a > b for a, b in zip(tail, tail[1:]))


def test_smoothing_schedule_stops_once_the_field_stops_moving():
    heat = builtin_scenario("heat-oracle")
    grid = Grid(1, math.pi / 2, 41, 20, 1.0)
    _, diag = picard_solve(heat, grid, default_resolver(heat),
                           epsilon_schedule=(0.5, 0.25, 0.125, 0.0625))
    # the stored feedback ignores the ramp width, so stage two changes nothing
    assert diag.epsilon_schedule == (0.5, 0.25)
    assert diag.final_epsilon == 0.25


def test_smoothing_stages_shrink_the_interstage_move():
    c2 = builtin_scenario("case2-bangbang")
    grid = Grid(1, 4.0, 81, 100, 1.0)
    res = default_resolver(c2)
    fields = {}
    for eps in (0.5, 0.25, 0.125):
        fields[eps], _ = picard_solve(c2, grid, res.with_epsilon(eps))
    move_a = float(np.max(np.abs(fields[0.25].values[0] - fields[0.5].values[0])))
    move_b = float(np.max(np.abs(fields[0.125].values[0] - fields[0.25].values[0])))
    assert move_b < move_a


def test_negative_tolerance_is_rejected():
    heat = builtin_scenario("heat-oracle")
    with pytest.raises(SolverError, match="tol"):
        picard_solve(heat, Grid(1, 1.0, 11, 4, 1.0), default_resolver(heat),
                     tol=0.0)


# ─── expanding boxes ─────────────────────────────────────────────────────────

def test_single_radius_study_has_no_differences():
    heat = builtin_scenario("heat-oracle")
    grid = Grid(1, 2.0, 41, 20, 1.0)
    _, report = expanding_domain_solve(heat, grid, (2.0,), default_resolver(heat))
    assert report.core_sup_diffs == ()
    assert len(report.growth_constants) == 1
    assert report.all_converged


def test_radii_must_increase():
    heat = builtin_scenario("heat-oracle")
    grid = Grid(1, 2.0, 41, 20, 1.0)
    with pytest.raises(SolverError, match="increasing"):
        expanding_domain_solve(heat, grid, (2.0, 2.0), default_resolver(heat))


def test_core_values_settle_as_the_box_grows():
    heat = builtin_scenario("heat-oracle")
    grid = Grid(1, 4.0, 81, 100, 1.0)
    _, report = expanding_domain_solve(
        heat, grid, (4.0, 6.0, 8.0), default_resolver(heat), core_radius=1.0)
    firsts = [d[0] for d in report.core_sup_diffs]
    assert firsts[0] > firsts[1]
    assert firsts[-1] <= 1e-4
    assert report.all_converged


def test_growing_boxes_reuse_the_base_spacing():
    heat = builtin_scenario("heat-oracle")
    grid = Grid(1, 2.0, 41, 20, 1.0)
    _, report = expanding_domain_solve(heat, grid, (2.0, 3.0), default_resolver(heat))
    assert report.radii == (2.0, 3.0)


# ─── data bounds ─────────────────────────────────────────────────────────────

def test_sup_bound_margin_on_the_heat_surface(heat_solved):
    spec, _, field, _ = heat_solved
    assert max_principle_check(spec, field) >= 0.0


def test_constant_payoff_pins_the_margin_at_zero():
    heat = builtin_scenario("heat-oracle")
    g5 = dataclasses.replace(
        heat,
        terminal_payoff_1=lambda x: np.full(np.shape(x[..., 0]), 5.0),
        terminal_payoff_2=lambda x: np.full(np.shape(x[..., 0]), 5.0))
    field, _ = picard_solve(g5, Grid(1, 2.0, 41, 20, 1.0), default_resolver(g5))
    assert abs(max_principle_check(g5, field)) <= 1e-12
    assert float(np.max(np.abs(field.values[0] - 5.0))) <= 1e-12


def test_sup_bound_refuses_unbounded_scenarios():
    c3 = builtin_scenario("case3-unbounded")
    grid = Grid(1, 4.0, 41, 50, c3.horizon)
    field, _ = picard_solve(c3, grid, default_resolver(c3),
                            epsilon_schedule=(0.5,))
    with pytest.raises(SolverError, match="growth_check"):
        max_principle_check(c3, field)


def test_growth_fit_of_the_bare_data_stays_below_one():
    c3 = builtin_scenario("case3-unbounded")
    grid = Grid(1, 4.0, 41, 10, c3.horizon)
    g1, g2 = _terminal_arrays(c3, grid)
    levels = grid.time_steps + 1
    field = ValueField.from_values(
        grid,
        np.broadcast_to(g1, (levels,) + grid.shape).copy(),
        np.broadcast_to(g2, (levels,) + grid.shape).copy())
    c_fit = growth_check(c3, field)
    assert 0.9 < max(c_fit) < 1.0  # sup of x^2/(1+x^2)


def test_growth_fit_of_the_zero_field_is_zero():
    c3 = builtin_scenario("case3-unbounded")
    grid = Grid(1, 4.0, 21, 5, c3.horizon)
    levels = grid.time_steps + 1
    field = ValueField.from_values(
        grid, np.zeros((levels,) + grid.shape), np.zeros((levels,) + grid.shape))
    assert growth_check(c3, field) == (0.0, 0.0)


def test_growth_fit_is_stable_across_box_sizes():
    c3 = builtin_scenario("case3-unbounded")
    grid = Grid(1, 4.0, 81, 100, c3.horizon)
    _, report = expanding_domain_solve(
        c3, grid, (4.0, 6.0), default_resolver(c3),
        epsilon_schedule=(0.5, 0.25), core_radius=2.0)
    cs = [max(pair) for pair in report.growth_constants]
    assert (max(cs) - min(cs)) / min(cs) < 0.2
    assert max(cs) > 1.5  # genuinely above the bare-data fit


# ─── interior consistency diagnostic ─────────────────────────────────────────

def test_linear_solution_has_vanishing_residual():
    lin = builtin_scenario("linear-oracle")
    field, _ = picard_solve(lin, Grid(1, 3.0, 61, 50, 1.0), default_resolver(lin))
    rep = residual(lin, field)
    assert rep.sup < 1e-10
    assert rep.band_width == (0.0, 0.0)


def test_heat_residual_shrinks_under_parabolic_refinement():
    heat = builtin_scenario("heat-oracle")
    res = default_resolver(heat)
    coarse, _ = picard_solve(heat, Grid(1, math.pi / 2, 101, 100, 1.0), res)
    fine, _ = picard_solve(heat, Grid(1, math.pi / 2, 201, 400, 1.0), res)
    ratio = residual(heat, coarse).sup / residual(heat, fine).sup
    assert ratio >= 3.0


def test_switching_band_is_masked_not_scored():
    c2 = builtin_scenario("case2-bangbang")
    field, _ = picard_solve(c2, Grid(1, 4.0, 161, 200, 1.0), default_resolver(c2),
                            epsilon_schedule=(0.5, 0.25, 0.125))
    rep = residual(c2, field)
    masked = [int(m.sum()) for m in rep.switching_mask]
    assert masked[0] > 0 and masked[1] > 0
    # band half-width sqrt(h) sup|f_i|, h = 0.05, sup|f_i| = 0.6
    for width in rep.band_width:
        assert width == pytest.approx(math.sqrt(0.05) * 0.6, rel=0.02)
    assert np.isfinite(rep.sup)


# ─── two space dimensions ────────────────────────────────────────────────────

def test_product_cosine_diffusion_in_two_dimensions():
    spec = heat_2d_spec(
        lambda x: np.cos(x[..., 0]) * np.cos(x[..., 1]),
        [[math.sqrt(2.0), 0.0], [0.0, math.sqrt(2.0)]])
    grid = Grid(2, math.pi / 2, 41, 200, 0.5)
    field, diag = picard_solve(spec, grid, default_resolver(spec))
    assert diag.converged
    # V(s, x, y) = exp(-2 s) cos x cos y
    got = field.value(1, 0.5, [0.0, 0.0])
    assert abs(got - math.exp(-1.0)) < 2e-3
    off = field.value(1, 0.5, [0.4, -0.3])
    assert abs(off - math.exp(-1.0) * math.cos(0.4) * math.cos(-0.3)) < 2e-3


def test_correlated_noise_keeps_the_data_bound():
    spec = heat_2d_spec(
        lambda x: np.cos(x[..., 0]) * np.cos(x[..., 1]),
        [[1.2, 0.4], [0.0, 1.0]])
    field, diag = picard_solve(spec, Grid(2, math.pi / 2, 31, 100, 0.5),
                               default_resolver(spec))
    assert diag.converged
    assert max_principle_check(spec, field) >= -1e-10
