import random
from fractions import Fraction

import pytest

from valmono.errors import NonMonicDivisor
from valmono.exact_algebra import (
    MultiPoly,
    RationalFunction,
    UniPoly,
    divided_derivative,
    euclid_div,
    ev_add,
    ev_gcd,
    ev_leq,
    ev_min,
    ev_sub,
    from_q_expansion,
    q_expansion,
    to_multipoly,
    to_unipoly,
)

SEED = 20260814

# two base variables x, y; distinguished variable is the UniPoly layer
X2 = 2
x = MultiPoly.variable(X2, 0)
y = MultiPoly.variable(X2, 1)


def rf(p) -> RationalFunction:
    return RationalFunction.of(p, X2)


def random_multipoly(rng: random.Random, width: int, max_terms=4, max_exp=3) -> MultiPoly:
    terms = {}
    for _ in range(rng.randint(0, max_terms)):
        e = tuple(rng.randint(0, max_exp) for _ in range(width))
        terms[e] = Fraction(rng.randint(-5, 5), rng.randint(1, 4))
    return MultiPoly(width, terms)


def random_unipoly(rng: random.Random, width: int, max_deg=4) -> UniPoly:
    return UniPoly(
        width,
        [random_multipoly(rng, width, max_terms=3, max_exp=2) for _ in range(rng.randint(0, max_deg + 1))],
    )


def test_exponent_vector_helpers():
    assert ev_add((1, 2), (3, -1)) == (4, 1)
    assert ev_sub((1, 2), (3, -1)) == (-2, 3)
    assert ev_min((1, 2), (3, -1)) == (1, -1)
    assert ev_leq((1, 0), (1, 2))
    assert not ev_leq((2, 0), (1, 2))
    assert ev_gcd((4, -6, 0)) == 2
    assert ev_gcd((0, 0)) == 0


def test_multipoly_ring_identities():
    p = x * x - y
    q = x + 2 * y
    assert p * q == q * p
    assert (p + q) - q == p
    assert p * MultiPoly.one(X2) == p
    assert p * MultiPoly.zero(X2) == MultiPoly.zero(X2)
    assert (x + y) ** 2 == x * x + 2 * x * y + y * y


def test_multipoly_laurent_shift():
    p = (x**2) * y + x
    shifted = p.shift((-1, 0))
    assert shifted == x * y + MultiPoly.monomial(X2, (0, 0)) and shifted.is_laurent_free()
    assert p.shift((-2, -1)).terms == {(0, 0): Fraction(1), (-1, -1): Fraction(1)}


def test_rational_function_monomial_denominator_folds():
    # single-term denominators become Laurent numerators with denominator 1
    r = RationalFunction(x, (x**2) * y)
    assert r.den == MultiPoly.one(X2)
    assert r.num.terms == {(-1, -1): Fraction(1)}


def test_rational_function_cross_multiplication_equality():
    # (x^2 - y^2)/(x - y) equals x + y without any gcd computation
    assert RationalFunction(x * x - y * y, x - y) == rf(x + y)
    assert RationalFunction(x, x + y) != rf(1)


def test_rational_function_denominator_normal_form():
    r = RationalFunction(x, 2 * x + 2 * y)
    assert r.den == x + y
    assert r.num == Fraction(1, 2) * x
    # common monomial factors of the denominator are cleared
    s = RationalFunction(x * y, x * y + x * x * y)
    assert s.den == MultiPoly.one(X2) + x
    assert s.num == MultiPoly.one(X2)


def test_rational_function_field_identities():
    rng = random.Random(SEED)
    for _ in range(60):
        a = RationalFunction(random_multipoly(rng, X2), random_multipoly(rng, X2) + 1)
        b = RationalFunction(random_multipoly(rng, X2), random_multipoly(rng, X2) + 1)
        assert a + b == b + a
        assert a * b == b * a
        assert a - a == rf(0)
        if not b.is_zero():
            assert (a / b) * b == a
        assert a * (b + 1) == a * b + a


def test_unipoly_basics():
    X = UniPoly.x(X2)
    p = X**2 - (x**2) * y
    assert p.degree == 2
    assert p.is_monic()
    assert p.coeff(0) == rf(-(x**2) * y)
    assert p.coeff(1).is_zero()
    assert (X + 1) * (X - 1) == X**2 - 1


def test_divided_derivative_golden():
    X = UniPoly.x(X2)
    q = X**2 - (x**2) * y
    assert divided_derivative(X**2, 1) == 2 * X
    assert divided_derivative(X**2, 2) == UniPoly.one(X2)
    assert divided_derivative(q, 1) == 2 * X
    assert divided_derivative(q, 2) == UniPoly.one(X2)
    assert divided_derivative(q, 3).is_zero()
    with pytest.raises(ValueError):
        divided_derivative(q, 0)


def test_divided_derivative_leibniz():
    """Convolution rule for divided derivatives, with order 0 the identity."""
    rng = random.Random(SEED + 1)

    def dd(p, b):
        return p if b == 0 else divided_derivative(p, b)

    for _ in range(40):
        p = random_unipoly(rng, X2)
        s = random_unipoly(rng, X2)
        for b in (1, 2, 3):
            lhs = dd(p * s, b)
            rhs = UniPoly.zero(X2)
            for r in range(b + 1):
                rhs = rhs + dd(p, r) * dd(s, b - r)
            assert lhs == rhs


def test_euclid_div_golden():
    X = UniPoly.x(X2)
    q = X**2 - (x**2) * y
    quot, rem = euclid_div(X**3, q)
    assert quot == X
    assert rem == X.scale(x**2 * y)
    assert quot * q + rem == X**3
    assert rem.degree < q.degree


def test_euclid_div_requires_monic():
    X = UniPoly.x(X2)
    with pytest.raises(NonMonicDivisor):
        euclid_div(X**2, X.scale(x))
    with pytest.raises(NonMonicDivisor):
        euclid_div(X**2, UniPoly.one(X2))


def test_euclid_div_property():
    rng = random.Random(SEED + 2)
    for _ in range(50):
        p = random_unipoly(rng, X2, max_deg=5)
        q = UniPoly.x_power(X2, rng.randint(1, 3)) + random_unipoly(rng, X2, max_deg=0)
        quot, rem = euclid_div(p, q)
        assert quot * q + rem == p
        assert rem.degree < q.degree


def test_q_expansion_golden():
    # X^4 along X^2 - x^2 y: constant x^4 y^2, middle 2 x^2 y, top 1
    X = UniPoly.x(X2)
    q = X**2 - (x**2) * y
    parts = q_expansion(X**4, q)
    assert parts == [
        UniPoly.constant(X2, x**4 * y**2),
        UniPoly.constant(X2, 2 * x**2 * y),
        UniPoly.one(X2),
    ]
    assert from_q_expansion(parts, q) == X**4


def test_q_expansion_of_key_itself():
    X = UniPoly.x(X2)
    q = X**2 - (x**2) * y
    assert q_expansion(q, q) == [UniPoly.zero(X2), UniPoly.one(X2)]
    assert q_expansion(UniPoly.zero(X2), q) == []


def test_q_expansion_round_trip():
    rng = random.Random(SEED + 3)
    for _ in range(40):
        p = random_unipoly(rng, X2, max_deg=6)
        q = UniPoly.x_power(X2, rng.randint(1, 3)) + random_unipoly(rng, X2, max_deg=0)
        parts = q_expansion(p, q)
        assert all(c.degree < q.degree for c in parts)
        assert from_q_expansion(parts, q) == p


def test_multipoly_unipoly_round_trip():
    p = MultiPoly(
        3,
        {
            (2, 1, 0): Fraction(-1),
            (0, 0, 2): Fraction(1),
            (1, 0, 1): Fraction(3, 2),
        },
    )
    u = to_unipoly(p)
    assert u.degree == 2
    assert u.coeff(0) == RationalFunction.of(-(x**2) * y, X2)
    assert to_multipoly(u) == p
    rng = random.Random(SEED + 4)
    for _ in range(30):
        q = random_multipoly(rng, 3, max_terms=5)
        assert to_multipoly(to_unipoly(q)) == q
