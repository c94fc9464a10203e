from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nashpde import EvalError, ParseError, evaluate, evaluate_array, free_vars, parse
from nashpde.dsl import BinOp, Call, Neg, Num, Var, to_source
from nashpde.feedback import smoothed_heaviside

VARS = frozenset({"t", "x1", "x2", "u1", "u2", "p1_1", "p2_1", "eps"})


def ev(src: str, **bindings: float) -> float:
    return evaluate(parse(src, VARS), bindings)


# ─── parsing ─────────────────────────────────────────────────────────────────

def test_number_literal_forms():
    assert ev("2") == 2.0
    assert ev("0.5") == 0.5
    assert ev(".5") == 0.5
    assert ev("2.") == 2.0
    assert ev("1e3") == 1000.0
    assert ev("1.5e-2") == 0.015


def test_precedence_oracle():
    # hand-evaluated references
    assert ev("2 + 3*4") == 14.0
    assert ev("2*3 + 4") == 10.0
    assert ev("(2 + 3)*4") == 20.0
    assert ev("2 - 3 - 4") == -5.0
    assert ev("12/3/2") == 2.0
    assert ev("7/2") == 3.5


def test_unary_minus_sits_between_power_and_product():
    assert ev("-2^2") == -4.0
    assert ev("2*-3") == -6.0
    assert ev("-x1^2", x1=3.0) == -9.0
    assert ev("--2") == 2.0


def test_power_accepts_integer_and_half_integer_literals():
    assert ev("x1^2", x1=3.0) == 9.0
    assert ev("x1^0.5", x1=4.0) == 2.0
    assert ev("x1^1.5", x1=4.0) == 8.0
    assert ev("x1^-1", x1=4.0) == 0.25
    assert ev("x1^-0.5", x1=4.0) == 0.5
    assert ev("2^-1") == 0.5
    assert ev("x1^(2)", x1=5.0) == 25.0


def test_expected_ast_shape():
    expr = parse("1 + 0.5*sin(x1)", VARS)
    assert expr == BinOp(
        "+", Num(1.0), BinOp("*", Num(0.5), Call("sin", (Var("x1"),))))


def test_feedback_clamp_body_parses_and_evaluates():
    body = "clamp(-p1_1/2, 0, 1)"
    assert ev(body, p1_1=-4.0) == 1.0
    assert ev(body, p1_1=1.0) == 0.0
    assert ev(body, p1_1=-1.0) == 0.5


PARSE_ERRORS = [
    ("x1 + ", 5),          # dangling operator
    ("* x1", 0),
    ("", 0),
    ("sin(x1", 6),         # unclosed call
    ("1 + (2", 6),
    ("1 2", 2),            # trailing garbage
    ("1..2", 2),
    ("1 + $", 4),          # unknown character
    ("x1 +* 2", 4),
    ("abs()", 4),
    ("sin(x1,x2)", 0),     # arity reported at the call site
    ("min(1)", 0),
    ("clamp(1,2)", 0),
    ("heav_eps(1)", 0),
    ("foo(1)", 0),         # unknown function
    ("x9", 0),             # undeclared identifier
    ("x1 ^ u1", 3),        # exponent must be a literal
    ("x1^0.3", 2),
    ("2^3^2", 1),          # chained exponent is not a literal either
]


@pytest.mark.parametrize("text,offset", PARSE_ERRORS)
def test_parse_error_offsets(text, offset):
    with pytest.raises(ParseError) as err:
        parse(text, VARS)
    assert err.value.offset == offset


# ─── evaluation ──────────────────────────────────────────────────────────────

def test_known_values():
    assert ev("1 + 0.5*sin(x1)", x1=0.0) == 1.0
    assert ev("heav_eps(0, 0.5)") == 0.5
    assert ev("sign(-2.5)") == -1.0
    assert ev("tanh(0)") == 0.0
    assert ev("min(2, x1)", x1=1.0) == 1.0
    assert ev("max(2, x1)", x1=1.0) == 2.0
    assert ev("exp(0) + cos(0)") == 2.0
    assert ev("sqrt(abs(-9))") == 3.0


def test_heav_eps_delegates_to_the_switch_helper():
    for eta in (-1.0, -0.25, 0.0, 0.1, 2.0):
        for eps in (0.0, 0.25, 0.5):
            assert ev("heav_eps(x1, eps)", x1=eta, eps=eps) == smoothed_heaviside(eta, eps)


def test_eval_error_positions():
    with pytest.raises(EvalError) as err:
        ev("1/0")
    assert err.value.offset == 1
    with pytest.raises(EvalError) as err:
        ev("sqrt(-1)")
    assert err.value.offset == 0
    with pytest.raises(EvalError) as err:
        ev("x1 + t", x1=1.0)  # t unbound
    assert err.value.offset == 5
    with pytest.raises(EvalError) as err:
        ev("heav_eps(1, -0.5)")
    assert err.value.offset == 0


def test_free_vars():
    assert free_vars(parse("x1*u1 + sin(t)", VARS)) == {"x1", "u1", "t"}
    assert free_vars(parse("3.14", VARS)) == frozenset()
    assert free_vars(parse("0.5*u1", VARS)) == {"u1"}


def test_array_mode_matches_scalar_mode():
    # vectorized transcendentals may differ from libm by an ulp, no more
    expr = parse("sin(x1) + exp(x1)*tanh(x1) - sqrt(abs(x1))", VARS)
    xs = np.linspace(-3.0, 3.0, 101)
    batch = evaluate_array(expr, {"x1": xs})
    single = np.array([evaluate(expr, {"x1": float(v)}) for v in xs])
    np.testing.assert_allclose(batch, single, rtol=1e-14, atol=1e-15)


def test_array_mode_is_unchecked():
    # the batch evaluator lets IEEE semantics through instead of raising
    out = evaluate_array(parse("1/x1", VARS), {"x1": np.array([0.0, 2.0])})
    assert math.isinf(out[0]) and out[1] == 0.5


# ─── printing round trip ─────────────────────────────────────────────────────

_leaves = st.one_of(
    st.floats(min_value=0.0, max_value=1e6, allow_nan=False).map(Num),
    st.sampled_from(sorted(VARS)).map(Var),
)


def _ast(children):
    unary = children.map(Neg)
    binop = st.tuples(st.sampled_from("+-*/"), children, children).map(
        lambda t: BinOp(t[0], t[1], t[2]))
    power = st.tuples(children, st.sampled_from([-2.0, -0.5, 1.0, 1.5, 2.0, 3.0])).map(
        lambda t: BinOp("^", t[0], Num(abs(t[1])) if t[1] >= 0 else Neg(Num(-t[1]))))
    call1 = st.tuples(st.sampled_from(["sin", "cos", "exp", "abs", "sqrt", "tanh", "sign"]),
                      children).map(lambda t: Call(t[0], (t[1],)))
    call2 = st.tuples(st.sampled_from(["min", "max", "heav_eps"]), children, children).map(
        lambda t: Call(t[0], (t[1], t[2])))
    call3 = st.tuples(children, children, children).map(
        lambda t: Call("clamp", (t[0], t[1], t[2])))
    return st.one_of(unary, binop, power, call1, call2, call3)


ast_strategy = st.recursive(_leaves, _ast, max_leaves=25)


@given(ast_strategy)
def test_print_then_parse_is_identity(expr):
    printed = to_source(expr)
    assert parse(printed, VARS) == expr
