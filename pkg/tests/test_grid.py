import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from casimirgas.errors import NonFiniteFieldError
from casimirgas.grid import (
    Field,
    Grid,
    derivative,
    field_from_csv,
    field_from_json,
    field_to_csv,
    field_to_json,
    integrate,
)
from conftest import random_trig_values


def test_spectral_derivative_of_sine():
    g = Grid(64)
    d = derivative(g.field(np.sin(g.x)))
    np.testing.assert_allclose(d.values, np.cos(g.x), atol=1e-13)


@pytest.mark.parametrize("scheme", ["spectral", "central4"])
def test_derivative_of_constant_is_zero(scheme, grid128):
    d = derivative(grid128.constant(3.7), scheme)
    np.testing.assert_allclose(d.values, 0.0, atol=1e-13)


def test_spectral_derivative_rational_profile(grid128):
    # d/dx 1/(2+cos x) = sin x/(2+cos x)^2 by the quotient rule
    f = grid128.field(1.0 / (2.0 + np.cos(grid128.x)))
    exact = np.sin(grid128.x) / (2.0 + np.cos(grid128.x)) ** 2
    d = derivative(f)
    assert np.max(np.abs(d.values - exact)) < 1e-10


def test_integrate_constant(grid64):
    assert integrate(grid64.constant(3.7)) == pytest.approx(3.7 * 2 * math.pi, rel=1e-14)


def test_integrate_cosine_plus_two(grid64):
    val = integrate(grid64.field(np.cos(grid64.x) + 2.0))
    assert val == pytest.approx(4 * math.pi, rel=1e-14)


def test_integrate_reciprocal_profile(grid256):
    # closed form: integral over a period of dx/(a+cos x) = 2*pi/sqrt(a^2-1)
    val = integrate(grid256.field(1.0 / (2.0 + np.cos(grid256.x))))
    assert val == pytest.approx(2 * math.pi / math.sqrt(3.0), rel=1e-12)


@settings(max_examples=25, deadline=None, derandomize=True)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 10**6))
@pytest.mark.parametrize("scheme", ["spectral", "central4"])
def test_derivative_linearity(scheme, a, b, seed):
    g = Grid(64)
    f = random_trig_values(g, seed)
    h = random_trig_values(g, seed + 1)
    lhs = derivative(g.field(a * f + b * h), scheme).values
    rhs = a * derivative(g.field(f), scheme).values + b * derivative(g.field(h), scheme).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-11 * (abs(a) + abs(b) + 1))


def test_periodic_integration_by_parts(grid128):
    for seed in range(5):
        f = grid128.field(random_trig_values(grid128, seed, offset=1.0))
        h = grid128.field(random_trig_values(grid128, seed + 50))
        total = integrate(Field(f.values * derivative(h).values, grid128)) + integrate(
            Field(derivative(f).values * h.values, grid128)
        )
        scale = np.linalg.norm(f.values) * np.linalg.norm(h.values) * grid128.dx + 1.0
        assert abs(total) < 1e-12 * scale


def test_integral_of_derivative_vanishes(grid128):
    for seed in range(5):
        f = grid128.field(random_trig_values(grid128, seed, offset=2.0))
        norm = math.sqrt(integrate(Field(f.values**2, grid128)))
        assert abs(integrate(derivative(f))) < 1e-12 * norm


@pytest.mark.parametrize("k", [1, 5, 17, 31])
def test_spectral_exact_on_fourier_modes(k):
    g = Grid(64)
    d = derivative(g.field(np.cos(k * g.x)))
    np.testing.assert_allclose(d.values, -k * np.sin(k * g.x), atol=2e-12 * k)


def test_central4_is_fourth_order():
    errs = []
    for n in (64, 128):
        g = Grid(n)
        f = g.field(1.0 / (2.0 + np.cos(g.x)))
        exact = np.sin(g.x) / (2.0 + np.cos(g.x)) ** 2
        errs.append(np.max(np.abs(derivative(f, "central4").values - exact)))
    ratio = errs[0] / errs[1]
    assert 12.0 < ratio < 20.0


def test_grid_rejects_small_or_odd_n():
    with pytest.raises(ValueError):
        Grid(6)
    with pytest.raises(ValueError):
        Grid(9)


def test_field_rejects_wrong_length(grid64):
    with pytest.raises(ValueError):
        Field(np.zeros(32), grid64)


def test_field_rejects_non_finite(grid64):
    vals = np.zeros(64)
    vals[11] = np.nan
    with pytest.raises(NonFiniteFieldError, match="index 11"):
        Field(vals, grid64)


def test_field_values_are_read_only(grid64):
    f = grid64.constant(1.0)
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_csv_roundtrip_is_exact(grid64):
    f = grid64.field(random_trig_values(grid64, 3))
    back = field_from_csv(field_to_csv(f))
    assert back.grid.n == 64
    np.testing.assert_array_equal(back.values, f.values)


def test_json_roundtrip_is_exact(grid64):
    f = grid64.field(random_trig_values(grid64, 4))
    back = field_from_json(field_to_json(f))
    np.testing.assert_array_equal(back.values, f.values)
