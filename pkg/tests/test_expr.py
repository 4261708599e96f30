import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pbglab import expr as E


def ev(text, **env):
    return E.eval(E.parse(text), env)


def test_arithmetic_and_precedence():
    assert ev("x*y + 1", x=2, y=3) == 7
    assert ev("2^3^2") == 512          # right associative
    assert ev("-2^2") == -4            # power binds tighter than unary minus
    assert ev("1 - 2 - 3") == -4       # left associative
    assert ev("x^2", x=-3) == 9


def test_functions_and_constants():
    assert ev("sin(pi/2)") == pytest.approx(1.0, abs=1e-15)
    assert ev("atan2(1,1)") == pytest.approx(math.pi / 4, abs=1e-15)
    assert ev("exp(0) + cos(0) + sqrt(4)") == 4


def test_syntax_error_offset():
    with pytest.raises(E.SyntaxError) as info:
        E.parse("x +")
    assert info.value.offset == 3


def test_syntax_error_offset_counts_bytes():
    # "é" is two bytes in UTF-8
    with pytest.raises(E.SyntaxError) as info:
        E.parse("1 + é")
    assert info.value.offset == 4


def test_unknown_function_and_missing_variable():
    with pytest.raises(E.UnknownFunction):
        E.parse("tan(x)")
    with pytest.raises(E.MissingVariable):
        ev("x + y", x=1)


@pytest.mark.parametrize("text,env", [("sqrt(x)", {"x": -1}), ("1/x", {"x": 0}), ("x^0.5", {"x": -2})])
def test_domain_errors(text, env):
    with pytest.raises(E.DomainError):
        ev(text, **env)


def test_fd_diff_examples():
    assert E.fd_diff(E.parse("x^2"), "x", {"x": 3}, 1e-5) == pytest.approx(6, abs=1e-6)
    assert E.fd_diff(E.parse("sin(x)"), "x", {"x": 0}) == pytest.approx(1, abs=1e-8)
    assert E.fd_diff(E.parse("5"), "x", {"x": 1}) == 0


def test_fd_diff_exact_on_quadratics():
    e = E.parse("3*x^2 - 2*x*y + 7")
    got = E.fd_diff(e, "x", {"x": 0.4, "y": -1.3}, 1e-3)
    assert got == pytest.approx(6 * 0.4 + 2 * 1.3, abs=1e-9)


def test_vectorised_evaluation():
    x = np.linspace(-1, 1, 5)
    assert np.allclose(ev("x^2 + 1", x=x), x ** 2 + 1)


def _leaves():
    return st.one_of(
        st.integers(-5, 5).map(lambda v: E.Num(float(v))),
        st.floats(-3, 3, allow_nan=False).map(lambda v: E.Num(float(v))),
        st.sampled_from(["x", "y"]).map(E.Var),
        st.just(E.Const("pi")),
    )


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from("+-*"), children, children).map(lambda t: E.BinOp(*t)),
        children.map(E.Neg),
        st.tuples(children, st.integers(0, 3)).map(lambda t: E.BinOp("^", t[0], E.Num(float(t[1])))),
        st.tuples(st.sampled_from(["sin", "cos"]), children).map(lambda t: E.Call(t[0], (t[1],))),
        st.tuples(children, children).map(lambda t: E.Call("atan2", t)),
    )


asts = st.recursive(_leaves(), _extend, max_leaves=12)


@settings(max_examples=150, deadline=None)
@given(asts, st.integers(0, 2 ** 31))
def test_render_parse_roundtrip(e, seed):
    rng = np.random.default_rng(seed)
    again = E.parse(E.render(e))
    for _ in range(10):
        env = {"x": rng.uniform(-2, 2), "y": rng.uniform(-2, 2)}
        a, b = E.eval(e, env), E.eval(again, env)
        assert abs(a - b) <= 1e-12 * max(1.0, abs(a))
