"""Exact polynomial arithmetic for the toolkit.

Three layers, all over exact rationals:

* ``MultiPoly``: multivariate Laurent polynomials in the base variables,
  stored as a map from exponent tuples to nonzero rationals.
* ``RationalFunction``: a quotient of two ``MultiPoly`` values; the
  coefficient field of everything univariate.
* ``UniPoly``: polynomials in one distinguished variable with
  ``RationalFunction`` coefficients; carries Euclidean division, divided
  derivatives and expansion along a monic key.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb, gcd
from typing import Iterable, Sequence

from .errors import NonMonicDivisor

ExponentVector = tuple  # tuple of ints, Laurent exponents allowed


# -- exponent-vector helpers -------------------------------------------------

def ev_zero(width: int) -> ExponentVector:
    return (0,) * width


def ev_unit(width: int, i: int) -> ExponentVector:
    return tuple(1 if q == i else 0 for q in range(width))


def ev_add(a: ExponentVector, b: ExponentVector) -> ExponentVector:
    return tuple(x + y for x, y in zip(a, b))


def ev_sub(a: ExponentVector, b: ExponentVector) -> ExponentVector:
    return tuple(x - y for x, y in zip(a, b))


def ev_min(a: ExponentVector, b: ExponentVector) -> ExponentVector:
    return tuple(min(x, y) for x, y in zip(a, b))


def ev_scale(a: ExponentVector, k: int) -> ExponentVector:
    return tuple(x * k for x in a)


def ev_leq(a: ExponentVector, b: ExponentVector) -> bool:
    """Componentwise order: a divides b as monomials."""
    return all(x <= y for x, y in zip(a, b))


def ev_total(a: ExponentVector) -> int:
    return sum(a)


def ev_support(a: ExponentVector) -> tuple:
    return tuple(i for i, x in enumerate(a) if x)


def ev_gcd(a: ExponentVector) -> int:
    g = 0
    for x in a:
        g = gcd(g, abs(x))
    return g


def _grlex_key(e: ExponentVector):
    return (sum(e), e)


class MultiPoly:
    """Laurent polynomial: finite map exponent tuple -> nonzero Fraction."""

    __slots__ = ("width", "terms")

    def __init__(self, width: int, terms: dict):
        self.width = width
        clean = {}
        for e, c in terms.items():
            c = Fraction(c)
            if c:
                if len(e) != width:
                    raise ValueError(f"exponent arity {len(e)} != width {width}")
                clean[tuple(e)] = c
        self.terms = clean

    # -- constructors --------------------------------------------------------

    @classmethod
    def zero(cls, width: int) -> "MultiPoly":
        return cls(width, {})

    @classmethod
    def constant(cls, width: int, c) -> "MultiPoly":
        return cls(width, {ev_zero(width): Fraction(c)})

    @classmethod
    def one(cls, width: int) -> "MultiPoly":
        return cls.constant(width, 1)

    @classmethod
    def monomial(cls, width: int, exps: Sequence[int], c=1) -> "MultiPoly":
        return cls(width, {tuple(exps): Fraction(c)})

    @classmethod
    def variable(cls, width: int, i: int) -> "MultiPoly":
        return cls.monomial(width, ev_unit(width, i))

    # -- predicates -----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or self.terms.keys() == {ev_zero(self.width)}

    def constant_value(self) -> Fraction:
        return self.terms.get(ev_zero(self.width), Fraction(0))

    def is_single_term(self) -> bool:
        return len(self.terms) == 1

    def single_term(self) -> tuple:
        """(exponents, coefficient) of the unique term."""
        ((e, c),) = self.terms.items()
        return e, c

    def is_laurent_free(self) -> bool:
        return all(all(x >= 0 for x in e) for e in self.terms)

    def support(self) -> list:
        return sorted(self.terms, key=_grlex_key)

    def leading(self) -> tuple:
        """Greatest term under graded lex; determinism only."""
        e = max(self.terms, key=_grlex_key)
        return e, self.terms[e]

    # -- arithmetic ------------------------------------------------------------

    def _check(self, other: "MultiPoly"):
        if self.width != other.width:
            raise ValueError(f"width {self.width} != {other.width}")

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = MultiPoly.constant(self.width, other)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        self._check(other)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, Fraction(0)) + c
        return MultiPoly(self.width, terms)

    __radd__ = __add__

    def __neg__(self):
        return MultiPoly(self.width, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = MultiPoly.constant(self.width, other)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return MultiPoly(self.width, {e: c * other for e, c in self.terms.items()})
        if not isinstance(other, MultiPoly):
            return NotImplemented
        self._check(other)
        terms: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = ev_add(e1, e2)
                terms[e] = terms.get(e, Fraction(0)) + c1 * c2
        return MultiPoly(self.width, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power of a polynomial; use RationalFunction")
        out = MultiPoly.one(self.width)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def shift(self, e: ExponentVector) -> "MultiPoly":
        """Multiply by the Laurent monomial with exponents e."""
        return MultiPoly(self.width, {ev_add(t, e): c for t, c in self.terms.items()})

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = MultiPoly.constant(self.width, other)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self.width == other.width and self.terms == other.terms

    def __hash__(self):
        return hash((self.width, frozenset(self.terms.items())))

    def __repr__(self):
        if self.is_zero():
            return "MultiPoly(0)"
        body = " + ".join(f"{c}*u^{e}" for e, c in sorted(self.terms.items()))
        return f"MultiPoly({body})"


class RationalFunction:
    """Quotient of two MultiPoly values.

    Normal form: a zero numerator forces denominator 1; a single-term
    denominator is folded into the (Laurent) numerator; otherwise the
    denominator is made Laurent-free with no common monomial factor and
    scaled so its graded-lex leading coefficient is 1.
    """

    __slots__ = ("num", "den")

    def __init__(self, num: MultiPoly, den: MultiPoly | None = None):
        if den is None:
            den = MultiPoly.one(num.width)
        if den.is_zero():
            raise ZeroDivisionError("rational function with zero denominator")
        if num.width != den.width:
            raise ValueError("numerator and denominator width differ")
        if num.is_zero():
            den = MultiPoly.one(num.width)
        elif den.is_single_term():
            e, c = den.single_term()
            num = num.shift(ev_scale(e, -1)) * (1 / c)
            den = MultiPoly.one(num.width)
        else:
            lows = None
            for e in den.terms:
                lows = e if lows is None else ev_min(lows, e)
            if any(lows):
                num = num.shift(ev_scale(lows, -1))
                den = den.shift(ev_scale(lows, -1))
            _, lc = den.leading()
            if lc != 1:
                num = num * (1 / lc)
                den = den * (1 / lc)
        self.num = num
        self.den = den

    @property
    def width(self) -> int:
        return self.num.width

    @classmethod
    def of(cls, value, width: int | None = None) -> "RationalFunction":
        if isinstance(value, RationalFunction):
            return value
        if isinstance(value, MultiPoly):
            return cls(value)
        if width is None:
            raise ValueError("width required to lift a constant")
        return cls(MultiPoly.constant(width, value))

    @classmethod
    def zero(cls, width: int) -> "RationalFunction":
        return cls(MultiPoly.zero(width))

    @classmethod
    def one(cls, width: int) -> "RationalFunction":
        return cls(MultiPoly.one(width))

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_one(self) -> bool:
        return self.num == self.den

    def is_polynomial(self) -> bool:
        return self.den.is_constant() and self.num.is_laurent_free()

    def as_multipoly(self) -> MultiPoly:
        if not self.den.is_constant():
            raise ValueError("not a polynomial")
        return self.num

    def is_constant(self) -> bool:
        return self.num.is_constant() and self.den.is_constant()

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("not a constant")
        return self.num.constant_value()

    def __add__(self, other):
        other = RationalFunction.of(other, self.width)
        return RationalFunction(
            self.num * other.den + other.num * self.den, self.den * other.den
        )

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(-self.num, self.den)

    def __sub__(self, other):
        other = RationalFunction.of(other, self.width)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = RationalFunction.of(other, self.width)
        return RationalFunction(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = RationalFunction.of(other, self.width)
        if other.is_zero():
            raise ZeroDivisionError("division by the zero rational function")
        return RationalFunction(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other):
        return RationalFunction.of(other, self.width) / self

    def __pow__(self, k: int):
        if k < 0:
            return RationalFunction(self.den, self.num) ** (-k)
        return RationalFunction(self.num**k, self.den**k)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, MultiPoly)):
            other = RationalFunction.of(other, self.width)
        if not isinstance(other, RationalFunction):
            return NotImplemented
        return self.num * other.den == other.num * self.den

    __hash__ = None

    def __repr__(self):
        if self.den.is_constant() and self.den.constant_value() == 1:
            return f"RF({self.num!r})"
        return f"RF({self.num!r} / {self.den!r})"


class UniPoly:
    """Polynomial in the distinguished variable over rational functions.

    ``coeffs[i]`` multiplies the i-th power; the tuple never ends in a zero.
    ``width`` is the arity of the base-variable layer.
    """

    __slots__ = ("width", "coeffs")

    def __init__(self, width: int, coeffs: Iterable):
        cs = [RationalFunction.of(c, width) for c in coeffs]
        while cs and cs[-1].is_zero():
            cs.pop()
        self.width = width
        self.coeffs = tuple(cs)

    @classmethod
    def zero(cls, width: int) -> "UniPoly":
        return cls(width, [])

    @classmethod
    def constant(cls, width: int, c) -> "UniPoly":
        return cls(width, [RationalFunction.of(c, width)])

    @classmethod
    def one(cls, width: int) -> "UniPoly":
        return cls.constant(width, 1)

    @classmethod
    def x(cls, width: int) -> "UniPoly":
        return cls(width, [0, 1])

    @classmethod
    def x_power(cls, width: int, k: int) -> "UniPoly":
        return cls(width, [0] * k + [1])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_monic(self) -> bool:
        return bool(self.coeffs) and self.coeffs[-1].is_one()

    def leading(self) -> RationalFunction:
        return self.coeffs[-1]

    def coeff(self, i: int) -> RationalFunction:
        if 0 <= i < len(self.coeffs):
            return self.coeffs[i]
        return RationalFunction.zero(self.width)

    def __add__(self, other):
        other = _as_unipoly(other, self.width)
        n = max(len(self.coeffs), len(other.coeffs))
        return UniPoly(self.width, [self.coeff(i) + other.coeff(i) for i in range(n)])

    __radd__ = __add__

    def __neg__(self):
        return UniPoly(self.width, [-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-_as_unipoly(other, self.width))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = _as_unipoly(other, self.width)
        if self.is_zero() or other.is_zero():
            return UniPoly.zero(self.width)
        out = [RationalFunction.zero(self.width)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a.is_zero():
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a * b
        return UniPoly(self.width, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power of a polynomial")
        out = UniPoly.one(self.width)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def scale(self, c) -> "UniPoly":
        c = RationalFunction.of(c, self.width)
        return UniPoly(self.width, [a * c for a in self.coeffs])

    def __eq__(self, other):
        other = _as_unipoly(other, self.width)
        if len(self.coeffs) != len(other.coeffs):
            return False
        return all(a == b for a, b in zip(self.coeffs, other.coeffs))

    __hash__ = None

    def __repr__(self):
        if self.is_zero():
            return "UniPoly(0)"
        return "UniPoly(" + ", ".join(repr(c) for c in self.coeffs) + ")"


def _as_unipoly(value, width: int) -> UniPoly:
    if isinstance(value, UniPoly):
        if value.width != width:
            raise ValueError("mixed base arity")
        return value
    return UniPoly(width, [RationalFunction.of(value, width)])


# -- operations ---------------------------------------------------------------

def divided_derivative(p: UniPoly, b: int) -> UniPoly:
    """b-th derivative divided by b!: binomial-weighted coefficient shift."""
    if b < 1:
        raise ValueError("order must be >= 1")
    if b > p.degree:
        return UniPoly.zero(p.width)
    return UniPoly(
        p.width,
        [p.coeffs[i] * Fraction(comb(i, b)) for i in range(b, len(p.coeffs))],
    )


def euclid_div(p: UniPoly, q: UniPoly) -> tuple:
    """p = quot*q + rem with deg rem < deg q; q must be monic of degree >= 1."""
    if q.degree < 1 or not q.is_monic():
        raise NonMonicDivisor("divisor must be monic of positive degree")
    quot = UniPoly.zero(p.width)
    rem = p
    while rem.degree >= q.degree:
        d = rem.degree - q.degree
        t = UniPoly.x_power(p.width, d).scale(rem.leading())
        quot = quot + t
        new_rem = rem - t * q
        if not new_rem.degree < rem.degree:
            raise ArithmeticError("division failed to reduce the degree")
        rem = new_rem
    return quot, rem


def q_expansion(p: UniPoly, q: UniPoly) -> list:
    """Coefficients p_j with p = sum p_j q^j and deg p_j < deg q.

    Computed by repeated Euclidean division; the zero polynomial expands
    to the empty list.
    """
    if q.degree < 1 or not q.is_monic():
        raise NonMonicDivisor("key must be monic of positive degree")
    out = []
    cur = p
    while not cur.is_zero():
        cur, rem = euclid_div(cur, q)
        out.append(rem)
    return out


def from_q_expansion(coeffs: Sequence[UniPoly], q: UniPoly) -> UniPoly:
    width = q.width
    out = UniPoly.zero(width)
    power = UniPoly.one(width)
    for c in coeffs:
        out = out + c * power
        power = power * q
    return out


def to_unipoly(p: MultiPoly) -> UniPoly:
    """Split a width-n polynomial along its last variable."""
    if p.width < 1:
        raise ValueError("need at least one variable")
    width = p.width - 1
    buckets: dict[int, dict] = {}
    for e, c in p.terms.items():
        k = e[-1]
        if k < 0:
            raise ValueError("negative power of the distinguished variable")
        buckets.setdefault(k, {})[e[:-1]] = c
    top = max(buckets) if buckets else -1
    coeffs = [
        RationalFunction(MultiPoly(width, buckets.get(k, {}))) for k in range(top + 1)
    ]
    return UniPoly(width, coeffs)


def to_multipoly(p: UniPoly) -> MultiPoly:
    """Inverse of to_unipoly; coefficients must be polynomial."""
    width = p.width + 1
    terms: dict = {}
    for k, c in enumerate(p.coeffs):
        if not c.den.is_constant():
            raise ValueError("coefficient is not polynomial")
        scale = c.den.constant_value()
        for e, coeff in c.num.terms.items():
            full = e + (k,)
            terms[full] = terms.get(full, Fraction(0)) + coeff / scale
    return MultiPoly(width, terms)
