import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superexp.expr import (
    Binary,
    Const,
    ExprDimensionError,
    ExprDomainError,
    ExprLexError,
    ExprSyntaxError,
    ProcessKind,
    Unary,
    Var,
    eval_expr,
    eval_process,
    parse_expression,
    parse_process,
    pretty,
    structure,
)


def value(src, **env):
    return float(eval_expr(parse_expression(src, tuple(env) or ("u",)), env))


@pytest.mark.parametrize(
    "src, expected",
    [
        ("2+3*4", 14.0),
        ("2*3^2", 18.0),
        ("-2^2", -4.0),
        ("2^3^2", 512.0),
        ("(2+3)*4", 20.0),
        ("8/4/2", 1.0),
        ("10-4-3", 3.0),
        ("--3", 3.0),
        ("2^-1", 0.5),
        ("1.5e1+.5", 15.5),
        ("abs(-3)+sqrt(16)", 7.0),
    ],
)
def test_precedence_golden(src, expected):
    assert value(src) == expected


def test_functions():
    assert value("cos(u)", u=0.0) == 1.0
    assert value("exp(u)", u=0.0) == 1.0
    assert value("log(exp(u))", u=2.0) == pytest.approx(2.0)
    assert value("tanh(u)", u=0.0) == 0.0
    assert value("sin(u)", u=math.pi / 2) == 1.0


@pytest.mark.parametrize(
    "src, d, exc, pos",
    [
        ("cos(", 1, ExprSyntaxError, 4),
        ("1+", 1, ExprSyntaxError, 2),
        ("(1", 1, ExprSyntaxError, 2),
        ("1)", 1, ExprSyntaxError, 1),
        ("2 3", 1, ExprSyntaxError, 2),
        ("", 1, ExprSyntaxError, 0),
        ("w2", 1, ExprDimensionError, 0),
        ("t+w0", 1, ExprDimensionError, 2),
        ("1,2", 1, ExprDimensionError, 1),
        ("1", 2, ExprDimensionError, 1),
        ("foo", 1, ExprLexError, 0),
        ("1+$", 1, ExprLexError, 2),
    ],
)
def test_error_positions(src, d, exc, pos):
    with pytest.raises(exc) as info:
        parse_process(src, d)
    assert info.value.position == pos


def test_kind_classification():
    assert parse_process("cos(w1)", 1).kind is ProcessKind.MARKOV
    one = parse_process("1", 1)
    assert one.kind is ProcessKind.DETERMINISTIC and one.d == 1
    two = parse_process("t, sin(w2)", 2)
    assert two.d == 2 and not two.is_deterministic


def test_eval_process_examples():
    assert eval_process(parse_process("cos(w1)", 1), 0.0, np.zeros(1))[0] == 1.0
    assert eval_process(parse_process("t*t", 1), 2.0, np.zeros(1))[0] == 4.0
    assert eval_process(parse_process("exp(w1)", 1), 0.0, np.zeros(1))[0] == 1.0


def test_eval_process_shapes():
    spec = parse_process("t, w1*w2", 2)
    t = np.linspace(0, 1, 5)[:, None]
    w = np.ones((5, 3, 2))
    assert eval_process(spec, t, w).shape == (5, 3, 2)


def test_domain_errors():
    spec = parse_process("log(w1)", 1)
    with pytest.raises(ExprDomainError) as info:
        eval_process(spec, 0.0, np.array([[1.0], [-1.0]]))
    assert info.value.index == (1,)
    with pytest.raises(ExprDomainError):
        eval_process(parse_process("1/w1", 1), 0.0, np.zeros(1))
    with pytest.raises(ExprDomainError):
        eval_process(parse_process("sqrt(w1)", 1), 0.0, -np.ones(1))


# --------------------------------------------------------------- properties --

_leaf = st.one_of(
    st.floats(0, 1e6, allow_nan=False).map(lambda v: Const(v, 0)),
    st.sampled_from(["t", "w1", "w2"]).map(lambda n: Var(n, 0)),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from(["neg", "sin", "cos", "exp", "log", "sqrt", "abs", "tanh"]), children).map(
            lambda p: Unary(p[0], p[1], 0)
        ),
        st.tuples(st.sampled_from(["add", "sub", "mul", "div", "pow"]), children, children).map(
            lambda p: Binary(p[0], p[1], p[2], 0)
        ),
    )


asts = st.recursive(_leaf, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(asts)
def test_pretty_round_trip(node):
    again = parse_expression(pretty(node), ("t", "w1", "w2"))
    assert structure(again) == structure(node)


@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from(["1", "0.5", "2", "1+t", "t^2-3", "exp(-t)", "sin(t), cos(t)"]),
    st.floats(0, 10),
    st.lists(st.floats(-50, 50), min_size=2, max_size=2),
    st.lists(st.floats(-50, 50), min_size=2, max_size=2),
)
def test_deterministic_ignores_w(src, t, w1, w2):
    d = src.count(",") + 1
    spec = parse_process(src, d)
    assert spec.is_deterministic
    a = eval_process(spec, t, np.array(w1[:d]))
    b = eval_process(spec, t, np.array(w2[:d]))
    assert np.array_equal(a, b)
