from fractions import Fraction

import pytest

from jetpoisson.tseries import TSeries


def t(a, d):
    return TSeries.var(1, a, d, order=8)


def test_arithmetic():
    x = t(1, 0)
    f = x * x + x.scale(2) + 1
    assert f.coeff((((1, 0), 2),)) == 1
    assert f.coeff((((1, 0), 1),)) == 2
    assert f.constant_term() == 1


def test_order_tracking():
    x = t(1, 0)
    f = (x * x).truncate(3)
    g = x.truncate(5)
    assert (f * g).order == 3
    assert f.diff(1, 0).order == 2


def test_truncation_drops_high_terms():
    x = t(1, 0)
    f = (x ** 5).truncate(3)
    assert f.is_zero


def test_diff():
    x, y = t(1, 0), t(1, 1)
    f = x * x * y
    assert f.diff(1, 0) == (x * y).scale(2)
    assert f.dx() == (x * y).scale(2)
    assert f.diff(1, 1) == x * x
    assert f.diff(1, 2).is_zero


def test_inverse():
    x = t(1, 0)
    f = 1 + x
    g = f.inverse()
    assert (f * g - 1).is_zero
    const = TSeries.const(1, Fraction(3, 4))
    assert (const.inverse() * const - 1).is_zero
    with pytest.raises(ZeroDivisionError):
        x.inverse()


def test_equality_respects_order():
    x = t(1, 0)
    a = (1 + x).truncate(2)
    b = (1 + x + x ** 5).truncate(2)
    assert a == b


def test_zero_through():
    x = t(1, 0)
    f = x ** 4
    assert f.is_zero_through(3)
    assert not f.is_zero_through(4)
