"""Parsers and printers for the toolkit's I/O surface.

Covers polynomial expressions ("z^2 - x^2*y"), value groups, and valuation
spec towers as JSON. Element and scalar strings live in ordered_value;
this module builds the composite formats on top.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .errors import ParseError, RankMismatch
from .exact_algebra import MultiPoly, RationalFunction, UniPoly, to_multipoly, to_unipoly
from .ordered_value import (
    IndependentGenerator,
    ValueGroup,
    format_element,
    parse_element,
    pi_generator,
    unit_generator,
)
from .valuation_core import Augmented, Composite, Monomial

# -- polynomial text ------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<frac>\d+\s*/\s*\d+)"
    r"|(?P<int>\d+)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_']*)"
    r"|(?P<op>[-+*^()]))"
)


def _tokenize(text: str) -> list:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise ParseError(f"unexpected character at {pos}: {text[pos:]!r}")
            break
        pos = m.end()
        if m.lastgroup == "frac":
            p, q = m.group("frac").split("/")
            out.append(("num", Fraction(int(p), int(q))))
        elif m.lastgroup == "int":
            out.append(("num", Fraction(m.group("int"))))
        elif m.lastgroup == "name":
            out.append(("name", m.group("name")))
        else:
            out.append(("op", m.group("op")))
    return out


class _PolyParser:
    """Recursive descent over +, -, *, ^ and parentheses."""

    def __init__(self, tokens, names):
        self.tokens = tokens
        self.pos = 0
        self.names = list(names)
        self.width = len(self.names)

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}, got {val!r}")

    def parse(self) -> MultiPoly:
        p = self.expr()
        if self.pos != len(self.tokens):
            raise ParseError(f"trailing input at token {self.pos}")
        return p

    def signed_term(self) -> MultiPoly:
        sign = 1
        kind, val = self.peek()
        while kind == "op" and val in "+-":
            self.take()
            if val == "-":
                sign = -sign
            kind, val = self.peek()
        return self.term() * sign

    def expr(self) -> MultiPoly:
        out = self.signed_term()
        while True:
            kind, val = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                nxt = self.signed_term()
                out = out + nxt if val == "+" else out - nxt
            else:
                return out

    def term(self) -> MultiPoly:
        out = self.factor()
        while True:
            kind, val = self.peek()
            if kind == "op" and val == "*":
                self.take()
                out = out * self.factor()
            else:
                return out

    def factor(self) -> MultiPoly:
        base = self.atom()
        kind, val = self.peek()
        if kind == "op" and val == "^":
            self.take()
            k = self.exponent()
            if k < 0:
                if not base.is_single_term():
                    raise ParseError("negative exponent on a non-monomial")
                e, c = base.single_term()
                if c != 1 and c != -1:
                    raise ParseError("negative exponent on a non-monic monomial")
                return MultiPoly.monomial(self.width, tuple(x * k for x in e), c**k)
            return base**k
        return base

    def exponent(self) -> int:
        kind, val = self.take()
        neg = False
        if kind == "op" and val == "-":
            neg = True
            kind, val = self.take()
        if kind != "num" or val.denominator != 1:
            raise ParseError("exponent must be an integer")
        k = int(val)
        return -k if neg else k

    def atom(self) -> MultiPoly:
        kind, val = self.take()
        if kind == "num":
            return MultiPoly.constant(self.width, val)
        if kind == "name":
            if val not in self.names:
                raise ParseError(f"unknown variable {val!r}")
            return MultiPoly.variable(self.width, self.names.index(val))
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ParseError(f"unexpected token {val!r}")


def parse_polynomial(text: str, names) -> MultiPoly:
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty polynomial")
    return _PolyParser(tokens, names).parse()


def parse_unipoly(text: str, names) -> UniPoly:
    """Parse over all variables and split along the last one."""
    return to_unipoly(parse_polynomial(text, names))


def _out_key(e):
    # distinguished (last) variable first, then total degree, then lex
    return (e[-1], sum(e), e)


def format_multipoly(p: MultiPoly, names) -> str:
    if p.is_zero():
        return "0"
    if len(names) != p.width:
        raise ValueError("name list width mismatch")
    parts = []
    for e in sorted(p.terms, key=_out_key, reverse=True):
        c = p.terms[e]
        factors = []
        for n, k in zip(names, e):
            if k == 0:
                continue
            factors.append(n if k == 1 else f"{n}^{k}")
        mag = abs(c)
        if not factors:
            body = str(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = f"{mag}*" + "*".join(factors)
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(("+ " if c > 0 else "- ") + body)
    return " ".join(parts)


def format_rational(r: RationalFunction, names) -> str:
    num = format_multipoly(r.num, names)
    if r.den.is_constant() and r.den.constant_value() == 1:
        return num
    den = format_multipoly(r.den, names)
    return f"({num})/({den})"


def format_unipoly(p: UniPoly, names, var: str) -> str:
    """Print over base names plus the distinguished variable."""
    if p.is_zero():
        return "0"
    if all(c.is_polynomial() for c in p.coeffs):
        return format_multipoly(to_multipoly(p), list(names) + [var])
    parts = []
    for k in range(p.degree, -1, -1):
        c = p.coeff(k)
        if c.is_zero():
            continue
        xs = var if k == 1 else f"{var}^{k}" if k else ""
        body = format_rational(c, names)
        if xs and not (c.is_constant() and abs(c.constant_value()) == 1):
            body = f"({body})*{xs}" if ("/" in body or " " in body) else f"{body}*{xs}"
        elif xs:
            body = xs if c.constant_value() > 0 else f"-{xs}"
        parts.append(body if not parts else ("+ " + body if not body.startswith("-") else "- " + body[1:]))
    return " ".join(parts)


# -- value groups and specs ------------------------------------------------------


def group_from_json(obj) -> ValueGroup:
    gens = []
    for entry in obj["generators"]:
        if entry == "1":
            gens.append(unit_generator())
        elif entry == "pi":
            gens.append(pi_generator())
        elif isinstance(entry, dict) and "rational" in entry:
            gens.append(IndependentGenerator(entry["name"], rational=Fraction(entry["rational"])))
        else:
            raise ParseError(f"unsupported generator {entry!r}")
    return ValueGroup(gens)


def group_to_json(group: ValueGroup) -> dict:
    out = []
    for g in group.names:
        gen = group.generator(g)
        if gen.name == "1" and gen.rational == 1:
            out.append("1")
        elif gen.name == "pi" and gen.rational is None:
            out.append("pi")
        elif gen.rational is not None:
            out.append({"name": gen.name, "rational": str(gen.rational)})
        else:
            raise ValueError(f"generator {gen.name!r} has no serializable form")
    return {"generators": out}


def spec_from_json(group: ValueGroup, names, obj):
    kind = obj.get("kind")
    if kind == "monomial":
        weights_map = obj["weights"]
        missing = [n for n in names if n not in weights_map]
        if missing:
            raise ParseError(f"missing weights for {missing}")
        parsed = [parse_element(group, str(weights_map[n])) for n in names]
        ranks = {w.rank for w in parsed}
        if len(ranks) != 1:
            raise RankMismatch("monomial weights of mixed rank")
        return Monomial(group, parsed)
    if kind == "composite":
        inner = spec_from_json(group, names, obj["inner"])
        key = parse_unipoly(str(obj["key"]), names)
        return Composite(key, inner)
    if kind == "augmented":
        base = spec_from_json(group, names, obj["base"])
        key = parse_unipoly(str(obj["key"]), names)
        assigned = parse_element(group, str(obj["value"]), rank=base.rank)
        return Augmented(base, key, assigned)
    raise ParseError(f"unknown spec kind {kind!r}")


def spec_to_json(spec, names) -> dict:
    if isinstance(spec, Monomial):
        return {
            "kind": "monomial",
            "weights": {n: format_element(w) for n, w in zip(names, spec.weights)},
        }
    if isinstance(spec, Composite):
        return {
            "kind": "composite",
            "key": format_unipoly(spec.key, names[:-1], names[-1]),
            "inner": spec_to_json(spec.inner, names),
        }
    if isinstance(spec, Augmented):
        return {
            "kind": "augmented",
            "base": spec_to_json(spec.base, names),
            "key": format_unipoly(spec.key, names[:-1], names[-1]),
            "value": format_element(spec.assigned),
        }
    raise TypeError(f"cannot serialize {type(spec).__name__}")


def _innermost_weight_names(val_obj) -> list:
    cur = val_obj
    while True:
        kind = cur.get("kind")
        if kind == "monomial":
            return list(cur["weights"].keys())
        cur = cur["inner"] if kind == "composite" else cur["base"]


def load_problem(obj):
    """Full problem JSON: {"group": ..., "vars": [...], "val": {...}}.

    Returns (group, names, spec). Variable order defaults to the innermost
    weight-map order; the last name is the distinguished variable.
    """
    group = group_from_json(obj.get("group", {"generators": ["1", "pi"]}))
    val = obj["val"]
    names = list(obj.get("vars") or _innermost_weight_names(val))
    if len(set(names)) != len(names):
        raise ParseError("duplicate variable names")
    return group, names, spec_from_json(group, names, val)


def problem_to_json(group: ValueGroup, names, spec) -> dict:
    return {
        "group": group_to_json(group),
        "vars": list(names),
        "val": spec_to_json(spec, names),
    }
