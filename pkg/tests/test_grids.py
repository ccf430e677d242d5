"""Grid fields, spectral evaluation, and bindings."""

import math

import numpy as np
import pytest

from topocharge.grids import (
    DerivativeOrderTooHigh,
    GridError,
    GridField,
    MissingTimeDerivative,
    TimeFunction,
    UnboundArbFun,
    dealias_mask,
    evaluate_on_grid,
)
from topocharge.jetexpr import Y, Z, biharmonic_rule, substitute_arbfun
from topocharge.parsing import default_symbols, parse_expr

TWO_PI = 2.0 * math.pi


def sine_grid(n=256):
    x = np.arange(n) * TWO_PI / n
    return GridField(np.sin(x), (TWO_PI,)), x


class TestGridField:
    def test_resolution_floor(self):
        with pytest.raises(GridError):
            GridField(np.zeros(8), (1.0,))

    def test_period_positive(self):
        with pytest.raises(GridError):
            GridField(np.zeros(32), (0.0,))

    def test_dim_mismatch(self):
        with pytest.raises(GridError):
            GridField(np.zeros((32, 32)), (1.0,))

    def test_integral(self):
        g, _ = sine_grid()
        assert abs(g.integral()) < 1e-12


class TestEvaluate:
    def test_first_derivative_oracle(self):
        g, x = sine_grid()
        ux = evaluate_on_grid(parse_expr("u_x", 1), g)
        assert np.max(np.abs(ux - np.cos(x))) <= 1e-10

    def test_identity_copy(self):
        g, _ = sine_grid()
        u = evaluate_on_grid(parse_expr("u", 1), g)
        assert np.array_equal(u, g.data)

    def test_nonlinear_oracle(self):
        g, x = sine_grid()
        v = evaluate_on_grid(parse_expr("u*u_x + u_xxx", 1), g)
        exact = np.sin(x) * np.cos(x) - np.cos(x)
        assert np.max(np.abs(v - exact)) <= 1e-9

    def test_order_cap(self):
        g, _ = sine_grid()
        with pytest.raises(DerivativeOrderTooHigh):
            evaluate_on_grid(parse_expr("u_xxxxxxx", 1), g)

    def test_missing_time_derivative(self):
        g, _ = sine_grid()
        with pytest.raises(MissingTimeDerivative):
            evaluate_on_grid(parse_expr("u_t", 1), g)

    def test_unbound_arbfun(self):
        g, _ = sine_grid()
        with pytest.raises(UnboundArbFun):
            evaluate_on_grid(parse_expr("f*u", 1), g)

    def test_time_function_bindings(self):
        g, x = sine_grid()
        g.time = 0.7
        f = TimeFunction.builtin("sin")
        v = evaluate_on_grid(parse_expr("f'*u", 1), g, fun_bindings={"f": f})
        assert np.allclose(v, math.cos(0.7) * np.sin(x))

    def test_spatial_arbfun_must_be_substituted(self):
        sym = default_symbols().with_arbfun("phi", (Y, Z), biharmonic_rule(0))
        e = parse_expr("phi*u", 3, sym)
        n = 16
        g = GridField(np.zeros((n, n, n)), (TWO_PI,) * 3)
        with pytest.raises(UnboundArbFun):
            evaluate_on_grid(e, g)
        bound = substitute_arbfun(e, "phi", parse_expr("y^2", 3, sym))
        assert np.array_equal(evaluate_on_grid(bound, g), np.zeros((n, n, n)))


def test_dealias_mask_fraction():
    m = dealias_mask((96,))
    # the 2/3 rule keeps |k| <= N/3
    assert m.sum() == 2 * 32 + 1
