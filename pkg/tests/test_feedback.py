from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nashpde import (
    ControlSet,
    DiffusionMatrixField,
    FeedbackResolver,
    GameSpec,
    ResolveError,
    builtin_scenario,
    check_gic,
    default_resolver,
    hamiltonian,
    resolve_feedback,
    resolve_feedback_batch,
    smoothed_heaviside,
)
from nashpde.games import _scalar_u, _stack1, _x1, _zero_payoff


def _zero_drift(t, x, u1, u2):
    x = np.asarray(x, dtype=np.float64)
    shape = np.broadcast_shapes(x.shape[:-1], np.shape(u1)[:-1], np.shape(u2)[:-1])
    return np.zeros(shape + (x.shape[-1],))


def affine_spec(*, f1=1.0, f2=1.0, h1=0.0, h2=0.0) -> GameSpec:
    """drift = f1 u1 + f2 u2, running payoffs h_i(t,x) u_i, both controls
    in [0,1]; the switching arguments are then p f_i + h_i by hand."""
    def drift(t, x, u1, u2):
        return _stack1(f1 * _scalar_u(u1) + f2 * _scalar_u(u2) + 0.0 * _x1(x))

    def run1(t, x, u1, u2):
        out = h1 * _scalar_u(u1) + 0.0 * _x1(x)
        return out + np.zeros(np.broadcast_shapes(out.shape, np.shape(_scalar_u(u2))))

    def run2(t, x, u1, u2):
        out = h2 * _scalar_u(u2) + 0.0 * _x1(x)
        return out + np.zeros(np.broadcast_shapes(out.shape, np.shape(_scalar_u(u1))))

    return GameSpec(
        name="affine-test", dim_x=1, horizon=1.0,
        sigma=DiffusionMatrixField.constant([[1.0]]),
        drift=drift, running_payoff_1=run1, running_payoff_2=run2,
        terminal_payoff_1=lambda x: 0.0 * _x1(x),
        terminal_payoff_2=lambda x: 0.0 * _x1(x),
        control_set_1=ControlSet.interval(0.0, 1.0),
        control_set_2=ControlSet.interval(0.0, 1.0),
        structure="affine-bang-bang", growth_exponent=1.0)


# ─── switching ramp ──────────────────────────────────────────────────────────

def test_switch_known_values():
    assert smoothed_heaviside(3.0, 0.0) == 1.0
    assert smoothed_heaviside(-2.0, 0.5) == 0.0
    assert smoothed_heaviside(0.0, 0.5) == 0.5
    assert smoothed_heaviside(0.0, 0.0) == 0.5
    assert smoothed_heaviside(-1e-300, 0.0) == 0.0
    assert smoothed_heaviside(0.25, 0.5) == 0.75  # on the ramp


def test_switch_exact_outside_the_ramp():
    for eta in (0.5, 0.7, 3.0):
        assert smoothed_heaviside(eta, 0.5) == 1.0
        assert smoothed_heaviside(-eta, 0.5) == 0.0


def test_switch_rejects_negative_width():
    with pytest.raises(ValueError):
        smoothed_heaviside(1.0, -0.1)


@given(st.floats(-10, 10), st.floats(-10, 10),
       st.sampled_from([0.0, 0.1, 0.5, 2.0]))
def test_switch_is_monotone_with_unit_range(eta1, eta2, eps):
    lo, hi = sorted([eta1, eta2])
    a, b = smoothed_heaviside(lo, eps), smoothed_heaviside(hi, eps)
    assert a <= b
    assert 0.0 <= a <= 1.0 and 0.0 <= b <= 1.0


@given(st.floats(-5, 5).filter(lambda v: abs(v) > 1e-6))
def test_switch_converges_to_the_step_selection(eta):
    exact = smoothed_heaviside(eta, 0.0)
    for eps in (1e-7, 1e-8):
        assert smoothed_heaviside(eta, eps) == exact


def test_switch_vectorizes():
    out = smoothed_heaviside(np.array([-1.0, -0.25, 0.0, 0.25, 1.0]), 0.5)
    np.testing.assert_array_equal(out, [0.0, 0.25, 0.5, 0.75, 1.0])


# ─── Hamiltonian ─────────────────────────────────────────────────────────────

def test_hamiltonian_worked_example():
    spec = affine_spec(f1=1.0, f2=1.0, h1=0.5)
    assert hamiltonian(spec, 1, 0.0, 0.0, 2.0, 1.0, 0.0) == 2.5
    assert hamiltonian(spec, 1, 0.0, 0.0, 2.0, 1.0, 1.0) == 4.5
    assert hamiltonian(spec, 2, 0.0, 0.0, 2.0, 1.0, 0.0) == 2.0


def test_hamiltonian_vanishes_without_drift_or_payoff():
    heat = builtin_scenario("heat-oracle")
    assert hamiltonian(heat, 1, 0.2, [0.3], [1.7], [0.5], [0.5]) == 0.0
    assert hamiltonian(heat, 2, 0.9, [-1.0], [0.0], [0.1], [0.9]) == 0.0


def test_hamiltonian_zero_gradient_drops_the_drift_term():
    spec = affine_spec(f1=3.0, f2=-2.0, h1=0.25)
    assert hamiltonian(spec, 1, 0.0, 0.0, 0.0, 1.0, 1.0) == 0.25


def test_hamiltonian_rejects_controls_outside_the_box():
    spec = affine_spec()
    with pytest.raises(ResolveError, match="u1"):
        hamiltonian(spec, 1, 0.0, 0.0, 1.0, 1.5, 0.0)
    with pytest.raises(ResolveError, match="u2"):
        hamiltonian(spec, 1, 0.0, 0.0, 1.0, 0.5, -0.2)


# ─── feedback resolution ─────────────────────────────────────────────────────

def test_case1_closed_form_clamps_the_gradient():
    c1 = builtin_scenario("case1-continuous")
    res = default_resolver(c1)
    u1, u2 = resolve_feedback(res, c1, 0.0, [0.0], [-4.0], [0.0])
    assert u1 == 1.0 and u2 == 0.0
    u1, _ = resolve_feedback(res, c1, 0.0, [0.0], [-1.0], [0.0])
    assert u1 == 0.5
    u1, _ = resolve_feedback(res, c1, 0.0, [0.0], [3.0], [0.0])
    assert u1 == 0.0


def test_sign_pattern_routes_the_bang_bang_switch():
    spec = affine_spec(f1=1.0, f2=1.0)
    res = FeedbackResolver.for_spec(spec, mode="separated-argmax")
    assert resolve_feedback(res, spec, 0.0, [0.0], [0.3], [-0.3]) == (1.0, 0.0)
    assert resolve_feedback(res, spec, 0.0, [0.0], [-0.3], [0.3]) == (0.0, 1.0)


def test_argmax_on_a_three_point_grid():
    spec = affine_spec(f1=1.0, f2=1.0)
    res = FeedbackResolver.for_spec(spec, mode="separated-argmax", grid_points=3)
    # switching argument p1 f1 + h1 = 2 > 0
    u1, u2 = resolve_feedback(res, spec, 0.0, [0.0], [2.0], [-1.0])
    assert u1 == 1.0 and u2 == 0.0


def test_best_response_agrees_with_argmax_on_decoupled_games():
    spec = affine_spec(f1=1.0, f2=-2.0, h1=0.1, h2=0.3)
    arg = FeedbackResolver.for_spec(spec, mode="separated-argmax", grid_points=9)
    br = FeedbackResolver.for_spec(spec, mode="best-response", grid_points=9)
    rng = np.random.default_rng(0)
    for _ in range(25):
        t = float(rng.uniform(0, 1))
        x, p1, p2 = (rng.uniform(-3, 3, size=1) for _ in range(3))
        assert resolve_feedback(arg, spec, t, x, p1, p2) == \
            resolve_feedback(br, spec, t, x, p1, p2)


def test_best_response_reports_cycles():
    # anti-coordination: player 1 wants to differ, player 2 wants to match
    def run1(t, x, u1, u2):
        return (_scalar_u(u1) - _scalar_u(u2)) ** 2 + 0.0 * _x1(x)

    def run2(t, x, u1, u2):
        return -((_scalar_u(u1) - _scalar_u(u2)) ** 2) + 0.0 * _x1(x)

    spec = GameSpec(
        name="anti", dim_x=1, horizon=1.0,
        sigma=DiffusionMatrixField.constant([[1.0]]),
        drift=_zero_drift, running_payoff_1=run1, running_payoff_2=run2,
        terminal_payoff_1=lambda x: 0.0 * _x1(x),
        terminal_payoff_2=lambda x: 0.0 * _x1(x),
        control_set_1=ControlSet.interval(0.0, 1.0),
        control_set_2=ControlSet.interval(0.0, 1.0),
        structure="general", growth_exponent=1.0)
    res = FeedbackResolver.for_spec(spec, mode="best-response", grid_points=3,
                                    max_br_iterations=16)
    with pytest.raises(ResolveError, match="no static Nash point"):
        resolve_feedback(res, spec, 0.0, [0.0], [0.0], [0.0])


def test_separated_output_ignores_the_other_players_gradient():
    c1 = builtin_scenario("case1-continuous")
    res = default_resolver(c1)
    for p2 in (-5.0, 0.0, 2.0):
        u1, _ = resolve_feedback(res, c1, 0.2, [0.4], [-1.2], [p2])
        assert u1 == 0.6


def test_bang_bang_switch_is_scale_invariant_without_running_payoff():
    spec = affine_spec(f1=1.0, f2=-1.5)  # h ≡ 0
    res = FeedbackResolver.for_spec(spec, mode="separated-argmax")
    rng = np.random.default_rng(1)
    for _ in range(20):
        p1, p2 = rng.uniform(-2, 2, size=2)
        base = resolve_feedback(res, spec, 0.0, [0.0], [p1], [p2])
        for lam in (0.5, 3.0, 100.0):
            assert resolve_feedback(
                res, spec, 0.0, [0.0], [lam * p1], [lam * p2]) == base


def test_outputs_stay_inside_the_control_boxes():
    c1 = builtin_scenario("case1-continuous")
    res = default_resolver(c1)
    rng = np.random.default_rng(2)
    t = rng.uniform(0, 1, size=200)
    x = rng.uniform(-5, 5, size=(200, 1))
    p1 = rng.uniform(-10, 10, size=(200, 1))
    p2 = rng.uniform(-10, 10, size=(200, 1))
    u1, u2 = resolve_feedback_batch(res, c1, t, x, p1, p2)
    assert np.all(u1 >= 0.0) and np.all(u1 <= 1.0)
    assert np.all(u2 >= -1.0) and np.all(u2 <= 1.0)


def test_batch_resolution_matches_pointwise_resolution():
    c2 = builtin_scenario("case2-bangbang")
    res = default_resolver(c2, smoothing_epsilon=0.25)
    rng = np.random.default_rng(3)
    t = rng.uniform(0, 1, size=50)
    x = rng.uniform(-4, 4, size=(50, 1))
    p1 = rng.uniform(-3, 3, size=(50, 1))
    p2 = rng.uniform(-3, 3, size=(50, 1))
    u1, u2 = resolve_feedback_batch(res, c2, t, x, p1, p2)
    for k in range(50):
        a, b = resolve_feedback(res, c2, float(t[k]), x[k], p1[k], p2[k])
        assert (a, b) == (float(u1[k, 0]), float(u2[k, 0]))


def test_pure_bang_bang_values_with_zero_width():
    c2 = builtin_scenario("case2-bangbang")
    res = default_resolver(c2)  # epsilon 0
    rng = np.random.default_rng(4)
    t = rng.uniform(0, 1, size=300)
    x = rng.uniform(-4, 4, size=(300, 1))
    p1 = rng.uniform(-3, 3, size=(300, 1))
    p2 = rng.uniform(-3, 3, size=(300, 1))
    u1, u2 = resolve_feedback_batch(res, c2, t, x, p1, p2)
    assert set(np.unique(u1)) <= {0.0, 0.5, 1.0}
    assert set(np.unique(u2)) <= {0.0, 0.5, 1.0}


def test_closed_form_mode_requires_stored_formulas():
    spec = affine_spec()  # no feedback_closed_form
    res = FeedbackResolver.for_spec(spec, mode="closed-form")
    with pytest.raises(ResolveError, match="closed-form"):
        resolve_feedback(res, spec, 0.0, [0.0], [1.0], [1.0])


# ─── sampled equilibrium audit ───────────────────────────────────────────────

@pytest.mark.parametrize("name", ["case1-continuous", "case2-bangbang"])
def test_builtin_feedbacks_certify_the_equilibrium_condition(name):
    spec = builtin_scenario(name)
    report = check_gic(default_resolver(spec), spec, 2000, 0)
    assert report.ok
    assert min(report.worst_violation) >= -1e-12
    assert report.violating_points == ()


def test_constant_feedback_fails_the_audit_where_payoff_rewards_action():
    c2 = builtin_scenario("case2-bangbang")
    zero = lambda t, x, p1, p2, heav: np.zeros(np.shape(_x1(x)))
    frozen = dataclasses.replace(c2, feedback_closed_form=(zero, zero))
    report = check_gic(default_resolver(frozen), frozen, 2000, 0)
    assert not report.ok
    assert min(report.worst_violation) < -1e-3
    assert len(report.violating_points) > 0


def test_audit_is_deterministic_per_seed():
    c1 = builtin_scenario("case1-continuous")
    res = default_resolver(c1)
    assert check_gic(res, c1, 500, 9) == check_gic(res, c1, 500, 9)
