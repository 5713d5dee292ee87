import math
import random

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from waveequiv.expr import (
    EPS, T, U, V1, V2, V3, X, Y,
    Binding, BindingError, Context, DomainError, ParseError,
    derivative_table, evaluate, expr_function, formal_function, normalize,
    parse, partial, substitute, to_text, total_derivative,
)


def ctx_with_m():
    ctx = Context()
    ctx.function("m", 1)
    return ctx


class TestParse:
    def test_jet_tokens(self):
        assert parse("u_t") == V3
        assert parse("u_x") == V1
        assert parse("u_y") == V2

    def test_square_normalizes_to_power(self):
        assert parse("u_x*u_x") == V1**2

    def test_jet_map_expression(self):
        md1 = formal_function("m", 1, (1,))
        expected = V1 / (1 - EPS * md1(U) * V1)
        assert parse("u_x/(1 - eps*m'(u)*u_x)", ctx_with_m()) == expected

    def test_numbers_are_exact_rationals(self):
        assert parse("0.1") == sp.Rational(1, 10)
        assert parse("3/4") == sp.Rational(3, 4)

    def test_syntax_error_has_position(self):
        with pytest.raises(ParseError) as err:
            parse("u_x + * u_y")
        assert err.value.position == 6

    def test_unknown_symbol(self):
        with pytest.raises(ParseError, match="unknown symbol 'q'"):
            parse("u_x + q")

    def test_unknown_function(self):
        with pytest.raises(ParseError, match="unknown function"):
            parse("m(u)")

    def test_prime_on_multiarg_is_ambiguous(self):
        ctx = Context()
        ctx.function("m", 2)
        with pytest.raises(ParseError, match="ambiguous"):
            parse("m'(u, y)", ctx)
        # marker form is fine
        assert parse("m_d1(u, y)", ctx) == formal_function("m", 2, (1, 0))(U, Y)

    def test_arity_mismatch(self):
        with pytest.raises(ParseError, match="takes 1 argument"):
            parse("m(u, x)", ctx_with_m())

    def test_unary_minus(self):
        assert parse("-u_t") == -V3


class TestPartial:
    def test_power_rule(self):
        assert normalize(partial(V1**2, V1) - 2 * V1) == 0

    def test_formal_derivative(self):
        m = formal_function("m", 1)
        md1 = formal_function("m", 1, (1,))
        assert partial(m(U), U) == md1(U)

    def test_linearity(self):
        m = formal_function("m", 1)
        md1 = formal_function("m", 1, (1,))
        assert normalize(partial(X * V1 + m(U) * V3, U) - md1(U) * V3) == 0

    def test_chain_rule_through_arguments(self):
        m = formal_function("m", 1)
        md1 = formal_function("m", 1, (1,))
        inner = X - EPS * m(U)
        assert partial(m(inner), U) == -EPS * md1(U) * md1(inner)


class TestTotalDerivative:
    def test_definition(self):
        assert total_derivative(U, "x") == V1

    def test_general_function(self):
        eta = formal_function("eta", 4)(X, Y, T, U)
        expected = sp.diff(eta, X) + sp.diff(eta, U) * V1
        assert normalize(total_derivative(eta, "x") - expected) == 0

    def test_product(self):
        assert total_derivative(X * U, "t") == X * V3

    def test_rejects_jets(self):
        with pytest.raises(Exception, match="jet"):
            total_derivative(V1, "x")


class TestSubstitute:
    def test_simple(self):
        assert substitute(V1 + V2, {V2: 0}) == V1

    def test_slot_style(self):
        f = sp.Symbol("fslot")
        assert substitute(f, {f: V1}) == V1

    def test_shift(self):
        m = formal_function("m", 1)
        assert substitute(X, {X: X - EPS * m(U)}) == X - EPS * m(U)

    def test_simultaneous(self):
        # swap must not cascade
        assert substitute(X + Y, {X: Y, Y: X}) == X + Y


class TestNormalize:
    def test_identical_rationals(self):
        q = sp.Symbol("q")
        assert normalize(V1 / (1 - q) - V1 * (1 - q) ** -1) == 0

    def test_cancellation(self):
        q = sp.Symbol("q")
        assert normalize((1 - q) * V1 / (1 - q)) == V1

    def test_jet_map_two_forms(self):
        # the transformed-flux expression assembled two ways
        md1 = formal_function("m", 1, (1,))
        a = (V1 + EPS * md1(U) * V3**2) / (1 + EPS * md1(U) * V1)
        b = V1 / (1 + EPS * md1(U) * V1) + EPS * md1(U) * V3**2 / (1 + EPS * md1(U) * V1)
        assert normalize(a - b) == 0
        assert normalize(a) == normalize(b)

    def test_two_forms_numeric_sampling(self, square):
        md1 = formal_function("m", 1, (1,))
        a = (V1 + EPS * md1(U) * V3**2) / (1 + EPS * md1(U) * V1)
        b = sp.together(V1 / (1 + EPS * md1(U) * V1)
                        + EPS * md1(U) * V3**2 / (1 + EPS * md1(U) * V1))
        rng = random.Random(12)
        for _ in range(100):
            binding = Binding(
                {"u": rng.uniform(-1, 1), "v1": rng.uniform(-0.5, 0.5),
                 "v3": rng.uniform(-0.5, 0.5), "eps": rng.uniform(0.01, 0.3)},
                functions={"m": square},
            )
            assert evaluate(a, binding) == pytest.approx(evaluate(b, binding), abs=1e-14)


class TestEvaluate:
    def test_jet_map_value(self, square):
        e = V1 / (1 - EPS * formal_function("m", 1, (1,))(U) * V1)
        b = Binding({"v1": 0.5, "u": 3.0, "eps": 0.1}, functions={"m": square})
        # independent hand evaluation: m'(3) = 6, 0.5 / (1 - 0.1*6*0.5)
        assert evaluate(e, b) == pytest.approx(0.5 / (1 - 0.1 * 6 * 0.5), rel=1e-15)

    def test_sum(self):
        assert evaluate(X + Y, Binding({"x": 1.0, "y": 2.0})) == 3.0

    def test_singular_denominator(self):
        q = sp.Symbol("q")
        with pytest.raises(DomainError):
            evaluate(1 / (1 - q), Binding({"q": 1.0}))

    def test_missing_binding(self):
        with pytest.raises(BindingError):
            evaluate(X + Y, Binding({"x": 1.0}))

    def test_jet_aliases(self):
        assert evaluate(V1, Binding({"u_x": 2.5})) == 2.5


# --- properties -------------------------------------------------------------

def _random_poly(rng, symbols, terms=3):
    out = sp.Integer(0)
    for _ in range(terms):
        c = sp.Rational(rng.randint(-4, 4), rng.randint(1, 3))
        mono = sp.Integer(1)
        for s in rng.sample(symbols, k=rng.randint(1, 2)):
            mono *= s ** rng.randint(1, 2)
        out += c * mono
    return out


def test_canonicality_of_equal_rationals():
    rng = random.Random(7)
    q = sp.Symbol("q")
    syms = [X, V1, U, q]
    for _ in range(40):
        p = _random_poly(rng, syms)
        d = _random_poly(rng, syms) + 1
        r = _random_poly(rng, syms)
        a = p / d + r
        b = (p + r * d) / d
        assert normalize(a) == normalize(b)


def test_differentiation_is_linear():
    rng = random.Random(8)
    m = formal_function("m", 1)
    syms = [X, U, V1, m(U)]
    for _ in range(40):
        a = _random_poly(rng, syms)
        b = _random_poly(rng, syms)
        s = rng.choice([X, U, V1])
        assert normalize(partial(a + b, s) - partial(a, s) - partial(b, s)) == 0


def test_eval_matches_derivative_by_finite_differences(square):
    rng = random.Random(9)
    m = formal_function("m", 1)
    syms = [X, U, V1]
    h = 1e-4
    for _ in range(25):
        e = _random_poly(rng, syms + [m(U)])
        s = rng.choice(syms)
        base = {"x": rng.uniform(-1, 1), "u": rng.uniform(-1, 1), "v1": rng.uniform(-1, 1)}
        exact = evaluate(partial(e, s), Binding(base, functions={"m": square}))
        up = dict(base)
        dn = dict(base)
        up[s.name] += h
        dn[s.name] -= h
        fd = (evaluate(e, Binding(up, functions={"m": square}))
              - evaluate(e, Binding(dn, functions={"m": square}))) / (2 * h)
        assert abs(fd - exact) <= 10 * h * h * max(1.0, abs(exact))


_ATOMS = [sp.Integer(2), sp.Rational(1, 3), sp.Integer(-5), X, Y, T, U, V1, V2, V3, EPS,
          formal_function("m", 1)(U), formal_function("m", 1, (1,))(U),
          formal_function("lam", 2)(X, Y)]


def _expr_strategy():
    def extend(children):
        return st.one_of(
            st.tuples(children, children).map(lambda ab: ab[0] + ab[1]),
            st.tuples(children, children).map(lambda ab: ab[0] * ab[1]),
            children.map(lambda e: e ** 2),
            children.map(lambda e: 1 / (e ** 2 + 1)),
        )
    return st.recursive(st.sampled_from(_ATOMS), extend, max_leaves=8)


@settings(max_examples=60, deadline=None)
@given(_expr_strategy())
def test_parse_print_round_trip(e):
    ctx = Context()
    ctx.function("m", 1)
    ctx.function("lam", 2)
    assert parse(to_text(e), ctx) == e


def test_expr_function_derivatives():
    fn = expr_function((U,), U**3)
    assert fn((2.0,), (0,)) == 8.0
    assert fn((2.0,), (1,)) == 12.0
    assert fn((2.0,), (2,)) == 12.0


def test_context_name_rules():
    ctx = Context()
    ctx.function("m", 1)
    with pytest.raises(Exception, match="already"):
        ctx.function("m", 2)
    with pytest.raises(Exception, match="already"):
        ctx.symbol("m")
    assert ctx.symbol("u_x") == V1
