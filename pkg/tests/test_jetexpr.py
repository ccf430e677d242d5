"""Expression layer: parsing, canonical form, calculus, evaluation."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topocharge.jetexpr import (
    JetExpr,
    T,
    X,
    Y,
    eval_at,
    multi_index,
    total_derivative,
)
from topocharge.parsing import ParseError, default_symbols, parse_expr
from topocharge.printing import to_source


def P(src, dim=1, sym=None):
    return parse_expr(src, dim, sym)


class TestParsing:
    def test_kdv_form_has_four_terms(self):
        e = P("u_t + u_x*u_xx + u_xxxx", 1)
        assert len(e.terms) == 3  # u_t, u_x*u_xx, u_xxxx; the sum is canonical
        e = P("u_tx + u_x*u_xx + u_xxxx + u_t", 1)
        assert len(e.terms) == 4

    def test_zero_literal(self):
        assert P("0").is_zero()

    def test_cancellation_to_zero(self):
        assert P("(1/2)*u_x^2 - (1/2)*u_x^2").is_zero()

    def test_subscript_order_insignificant(self):
        assert P("u_txxy", 2) == P("u_xtyx", 2)

    def test_unknown_symbol(self):
        with pytest.raises(ParseError, match="unknown symbol"):
            P("q + u", 1)

    def test_axis_outside_dim(self):
        with pytest.raises(ParseError):
            P("u_y", 1)
        with pytest.raises(ParseError):
            P("z", 2)

    def test_implicit_multiplication_rejected(self):
        with pytest.raises(ParseError, match="implicit multiplication"):
            P("2 u_x", 1)

    def test_arbfun_outside_signature(self):
        with pytest.raises(ParseError, match="outside"):
            P("f_x", 1)

    def test_primes(self):
        assert P("f'''", 1).fun_keys() == {("f", (T,), (3,), ())}

    def test_division_by_jet_rejected(self):
        with pytest.raises(ParseError):
            P("1/u_x", 1)

    def test_decimal_literal_exact(self):
        e = P("0.125*u", 1)
        ((mono, coeff),) = e.terms
        assert coeff == Fraction(1, 8)

    def test_syntax_error_offset(self):
        with pytest.raises(ParseError) as err:
            P("u_x + ", 1)
        assert "offset" in str(err.value)

    def test_roundtrip_through_printer(self):
        sym = default_symbols().with_param("alpha").with_param("sigma", Fraction(1))
        for src in [
            "u_tx + u_x^2 + u*u_xx + u_xxxx + sigma*u_yy",
            "x*f - 1/2*sigma*y^2*f'",
            "-u_y/7 + 3/4*x^2*u_xy - alpha*u/3",
            "x/alpha",
        ]:
            e = parse_expr(src, 2, sym)
            assert parse_expr(to_source(e), 2, sym) == e


class TestRootSymbols:
    def test_square_rewrite(self):
        sym = default_symbols().with_param("a", Fraction(2))
        assert parse_expr("a^2", 1, sym) == JetExpr.number(2)
        assert parse_expr("a^3", 1, sym) == 2 * parse_expr("a", 1, sym)

    def test_reciprocal_of_root(self):
        sym = default_symbols().with_param("a", Fraction(2))
        e = parse_expr("1/a", 1, sym)
        assert e * parse_expr("a", 1, sym) == JetExpr.number(1)


class TestDerivatives:
    def test_leibniz(self):
        assert total_derivative(P("u*u_x"), X) == P("u_x^2 + u*u_xx")

    def test_kp_fx_is_derivative_of_potential(self):
        assert total_derivative(P("1/2*u^2 + u_xx"), X) == P("u*u_x + u_xxx")

    def test_arbfun_product_rule(self):
        assert total_derivative(P("f*u_x"), T) == P("f'*u_x + f*u_tx")

    def test_explicit_variable(self):
        assert total_derivative(P("x^2*u", 2), X) == P("2*x*u + x^2*u_x", 2)

    def test_phi_spatial_only(self):
        sym = default_symbols().with_arbfun("phi", (Y,))
        e = parse_expr("phi*u", 2, sym)
        assert total_derivative(e, T) == parse_expr("phi*u_t", 2, sym)
        assert total_derivative(e, Y) == parse_expr("phi_y*u + phi*u_y", 2, sym)


class TestEval:
    def test_square(self):
        assert eval_at(P("u_x^2"), {"u_x": 3}) == 9

    def test_arbfun(self):
        assert eval_at(P("f'*u_x"), {"u_x": 2}, funs={"f'": 5}) == 10

    def test_missing_binding(self):
        from topocharge.jetexpr import MissingBinding

        with pytest.raises(MissingBinding):
            eval_at(P("u_x + u_xx"), {"u_x": 1})

    def test_kp_flux_matches_independent_evaluation(self):
        # Phi^x of the first KP current: (u_t + u*u_x + u_xxx) f
        e = P("(u_t + u*u_x + u_xxx)*f", 2)
        point = {"u_t": 0.3, "u": -1.2, "u_x": 0.7, "u_xxx": 2.5}
        fv = 1.7
        expected = (0.3 + (-1.2) * 0.7 + 2.5) * fv  # computed independently
        got = eval_at(e, point, funs={"f": fv})
        assert math.isclose(got, expected, rel_tol=1e-12)


# -- property tests ---------------------------------------------------------

AX = st.sampled_from([T, X, Y])


@st.composite
def small_exprs(draw, dim=2):
    """Random polynomial jet expressions of modest order and degree."""
    jets = ["u", "u_t", "u_x", "u_y", "u_xx", "u_xy", "u_tx", "u_xxy"]
    nterms = draw(st.integers(1, 4))
    parts = []
    for _ in range(nterms):
        num = draw(st.integers(-6, 6))
        den = draw(st.integers(1, 4))
        if num == 0:
            num = 1
        nfac = draw(st.integers(1, 3))
        factors = [draw(st.sampled_from(jets)) for _ in range(nfac)]
        if draw(st.booleans()):
            factors.append(draw(st.sampled_from(["x", "y"])))
        parts.append(f"{num}/{den}*" + "*".join(factors))
    return parse_expr(" + ".join(parts), dim)


@given(small_exprs())
@settings(max_examples=60, deadline=None)
def test_canonical_form_idempotent(e):
    rebuilt = JetExpr.from_pairs([(c, m) for m, c in e.terms])
    assert rebuilt == e


@given(small_exprs(), AX, AX)
@settings(max_examples=60, deadline=None)
def test_total_derivatives_commute(e, v1, v2):
    assert total_derivative(total_derivative(e, v1), v2) == total_derivative(
        total_derivative(e, v2), v1
    )


@given(small_exprs(), small_exprs(), AX)
@settings(max_examples=40, deadline=None)
def test_total_derivative_linear(e1, e2, v):
    a, b = Fraction(3, 7), Fraction(-5, 2)
    assert total_derivative(a * e1 + b * e2, v) == a * total_derivative(
        e1, v
    ) + b * total_derivative(e2, v)


@given(small_exprs(), small_exprs())
@settings(max_examples=30, deadline=None)
def test_eval_homomorphism(e1, e2):
    point = {"u": 0.37, "u_t": -1.4, "u_x": 0.81, "u_y": 2.2, "u_xx": -0.09,
             "u_xy": 1.13, "u_tx": 0.5, "u_xxy": -2.01}
    vars_ = {"x": 1.7, "y": -0.3, "t": 0.0}
    va = eval_at(e1, point, vars_)
    vb = eval_at(e2, point, vars_)
    vprod = eval_at(e1 * e2, point, vars_)
    vsum = eval_at(e1 + e2, point, vars_)
    assert math.isclose(vprod, va * vb, rel_tol=1e-12, abs_tol=1e-9)
    assert math.isclose(vsum, va + vb, rel_tol=1e-12, abs_tol=1e-9)


def test_multi_index_sugar():
    assert multi_index("txxy") == (1, 2, 1, 0)
