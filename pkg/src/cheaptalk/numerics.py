"""Exact rationals, fixed-point reals and the small expression language.

Rational protocol objects (vertex entries, refinement weights, index counts)
are plain :class:`fractions.Fraction` values.  Irrational quantities live in
:class:`Real`, a binary fixed-point number with a configurable number of
fraction bits.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

DEFAULT_PRECISION = 128

Number = Union["Real", Fraction, int]


class NumericsError(ValueError):
    """Base class for numeric usage errors."""


class ExpressionError(NumericsError):
    """Raised for malformed expressions, negative roots and division by zero."""


class SingularMatrixError(NumericsError):
    pass


def _round_div(num: int, den: int) -> int:
    """Integer ``num / den`` rounded to nearest (ties away from zero)."""
    if den < 0:
        num, den = -num, -den
    if num >= 0:
        return (2 * num + den) // (2 * den)
    return -((-2 * num + den) // (2 * den))


class Real:
    """Fixed-point real ``raw / 2**bits``.

    Instances are immutable.  Arithmetic between two reals requires equal
    precision; ints and Fractions are converted on the fly.
    """

    __slots__ = ("raw", "bits")

    def __init__(self, raw: int, bits: int = DEFAULT_PRECISION):
        object.__setattr__(self, "raw", int(raw))
        object.__setattr__(self, "bits", int(bits))

    def __setattr__(self, name, value):
        raise AttributeError("Real is immutable")

    # construction -------------------------------------------------------
    @classmethod
    def from_fraction(cls, value: Fraction | int, bits: int = DEFAULT_PRECISION) -> "Real":
        value = Fraction(value)
        return cls(_round_div(value.numerator << bits, value.denominator), bits)

    @classmethod
    def coerce(cls, value: Number, bits: int = DEFAULT_PRECISION) -> "Real":
        if isinstance(value, Real):
            if value.bits != bits:
                return value.with_bits(bits)
            return value
        return cls.from_fraction(value, bits)

    def with_bits(self, bits: int) -> "Real":
        if bits == self.bits:
            return self
        if bits > self.bits:
            return Real(self.raw << (bits - self.bits), bits)
        return Real(_round_div(self.raw, 1 << (self.bits - bits)), bits)

    # conversions --------------------------------------------------------
    def to_fraction(self) -> Fraction:
        return Fraction(self.raw, 1 << self.bits)

    def __float__(self) -> float:
        return self.raw / (1 << self.bits)

    def hex(self) -> str:
        sign = "-" if self.raw < 0 else ""
        return f"{sign}0x{abs(self.raw):x}p-{self.bits}"

    @classmethod
    def fromhex(cls, text: str) -> "Real":
        m = re.fullmatch(r"(-?)0x([0-9a-f]+)p-(\d+)", text.strip())
        if not m:
            raise NumericsError(f"bad fixed-point hex literal {text!r}")
        raw = int(m.group(2), 16)
        return cls(-raw if m.group(1) else raw, int(m.group(3)))

    def decimal(self, digits: int = 40) -> str:
        """Decimal expansion rounded to ``digits`` fractional digits."""
        scaled = _round_div(self.raw * 10**digits, 1 << self.bits)
        sign = "-" if scaled < 0 else ""
        scaled = abs(scaled)
        whole, frac = divmod(scaled, 10**digits)
        return f"{sign}{whole}.{frac:0{digits}d}"

    def __repr__(self) -> str:
        return f"Real({self.decimal(20)}, bits={self.bits})"

    # arithmetic ---------------------------------------------------------
    def _other(self, other) -> "Real":
        if isinstance(other, Real):
            if other.bits != self.bits:
                raise NumericsError(f"precision mismatch: {self.bits} vs {other.bits}")
            return other
        if isinstance(other, (int, Fraction)):
            return Real.from_fraction(other, self.bits)
        return NotImplemented

    def __add__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        return Real(self.raw + o.raw, self.bits)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        return Real(self.raw - o.raw, self.bits)

    def __rsub__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        return Real(o.raw - self.raw, self.bits)

    def __mul__(self, other):
        if isinstance(other, int):
            return Real(self.raw * other, self.bits)
        if isinstance(other, Fraction):
            return Real(_round_div(self.raw * other.numerator, other.denominator), self.bits)
        o = self._other(other)
        if o is NotImplemented:
            return o
        return Real(_round_div(self.raw * o.raw, 1 << self.bits), self.bits)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Fraction(other)
            if other == 0:
                raise ZeroDivisionError("division of Real by zero")
            return Real(_round_div(self.raw * other.denominator, other.numerator), self.bits)
        o = self._other(other)
        if o is NotImplemented:
            return o
        if o.raw == 0:
            raise ZeroDivisionError("division of Real by zero")
        return Real(_round_div(self.raw << self.bits, o.raw), self.bits)

    def __rtruediv__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        return o / self

    def __neg__(self):
        return Real(-self.raw, self.bits)

    def __abs__(self):
        return Real(abs(self.raw), self.bits)

    def sqrt(self) -> "Real":
        if self.raw < 0:
            raise ExpressionError("square root of a negative number")
        # two extra bits so the final rounding is to nearest
        r = math.isqrt(self.raw << (self.bits + 2))
        return Real((r + 1) >> 1, self.bits)

    # comparison ---------------------------------------------------------
    def _cmp_key(self, other):
        if isinstance(other, Real):
            if other.bits == self.bits:
                return self.raw, other.raw
            return self.to_fraction(), other.to_fraction()
        if isinstance(other, (int, Fraction)):
            return self.to_fraction(), Fraction(other)
        return None

    def __eq__(self, other):
        k = self._cmp_key(other)
        return NotImplemented if k is None else k[0] == k[1]

    def __lt__(self, other):
        k = self._cmp_key(other)
        return NotImplemented if k is None else k[0] < k[1]

    def __le__(self, other):
        k = self._cmp_key(other)
        return NotImplemented if k is None else k[0] <= k[1]

    def __gt__(self, other):
        k = self._cmp_key(other)
        return NotImplemented if k is None else k[0] > k[1]

    def __ge__(self, other):
        k = self._cmp_key(other)
        return NotImplemented if k is None else k[0] >= k[1]

    def __hash__(self):
        return hash(self.to_fraction())


def ulp_tolerance(bits: int, shift: int = 8) -> Fraction:
    """``2**(shift - bits)``, the default absolute error budget."""
    return Fraction(2) ** (shift - bits)


def real_sum(values: Iterable[Real], bits: int = DEFAULT_PRECISION) -> Real:
    return Real(sum(v.raw for v in values), bits)


# ---------------------------------------------------------------- rationals


def lcm_denominators(values: Sequence[Fraction]) -> int:
    if not values:
        raise NumericsError("lcm_denominators needs at least one value")
    return math.lcm(*(Fraction(v).denominator for v in values))


def rationalize(x: Real | Fraction, max_denominator: int) -> Fraction:
    """Closest rational to ``x`` with denominator at most ``max_denominator``."""
    if max_denominator < 1:
        raise NumericsError("max_denominator must be positive")
    value = x.to_fraction() if isinstance(x, Real) else Fraction(x)
    return value.limit_denominator(max_denominator)


def fraction_str(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def parse_fraction(text: str) -> Fraction:
    return Fraction(text)


# ------------------------------------------------------------ linear algebra


def _gauss(a: list[list[Fraction]], b: list[Fraction], pivot_floor: Fraction | None) -> list[Fraction]:
    n = len(a)
    if any(len(row) != n for row in a) or len(b) != n:
        raise NumericsError("solve_linear needs a square matrix and matching rhs")
    a = [row[:] for row in a]
    b = b[:]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(a[r][col]))
        mag = abs(a[piv][col])
        if mag == 0 or (pivot_floor is not None and mag < pivot_floor):
            raise SingularMatrixError(f"pivot {float(mag):.3e} in column {col} below threshold")
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            b[col], b[piv] = b[piv], b[col]
        pr = a[col]
        for r in range(col + 1, n):
            factor = a[r][col] / pr[col]
            if factor:
                row = a[r]
                for c in range(col, n):
                    row[c] -= factor * pr[c]
                b[r] -= factor * b[col]
    x = [Fraction(0)] * n
    for r in range(n - 1, -1, -1):
        acc = b[r] - sum(a[r][c] * x[c] for c in range(r + 1, n))
        x[r] = acc / a[r][r]
    return x


def solve_exact(matrix: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> list[Fraction]:
    """Exact Gaussian elimination over the rationals."""
    return _gauss([[Fraction(v) for v in row] for row in matrix], [Fraction(v) for v in rhs], None)


def solve_linear(matrix: Sequence[Sequence[Number]], rhs: Sequence[Number],
                 bits: int = DEFAULT_PRECISION) -> list[Real]:
    """Solve ``A x = b`` and return ``x`` at ``bits`` of precision.

    Fixed-point inputs are exact dyadic rationals, so elimination runs in
    rational arithmetic and only the result is rounded.  Pivots smaller than
    ``2**(16 - bits)`` are treated as singular.
    """

    def frac(v):
        return v.to_fraction() if isinstance(v, Real) else Fraction(v)

    a = [[frac(v) for v in row] for row in matrix]
    b = [frac(v) for v in rhs]
    x = _gauss(a, b, Fraction(2) ** (16 - bits))
    return [Real.from_fraction(v, bits) for v in x]


def matrix_rank(rows: Sequence[Sequence[Fraction]]) -> int:
    m = [[Fraction(v) for v in row] for row in rows]
    rank = 0
    ncols = len(m[0]) if m else 0
    for col in range(ncols):
        piv = next((r for r in range(rank, len(m)) if m[r][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for r in range(len(m)):
            if r != rank and m[r][col] != 0:
                f = m[r][col] / m[rank][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[rank])]
        rank += 1
    return rank


# --------------------------------------------------------------- expressions

_TOKEN = re.compile(r"\s*(?:(\d+\.\d+|\d+)|(sqrt)|(.))")


@dataclass(frozen=True)
class Expr:
    """Expression tree: ``op`` is one of num, sqrt, neg, +, -, *, /."""

    op: str
    args: tuple = ()
    value: Fraction | None = None

    def exact(self) -> Fraction | None:
        """Exact rational value, or None when a genuine square root occurs."""
        if self.op == "num":
            return self.value
        vals = [a.exact() for a in self.args]
        if any(v is None for v in vals):
            return None
        if self.op == "sqrt":
            (v,) = vals
            if v < 0:
                raise ExpressionError("square root of a negative number")
            rn, rd = math.isqrt(v.numerator), math.isqrt(v.denominator)
            if rn * rn == v.numerator and rd * rd == v.denominator:
                return Fraction(rn, rd)
            return None
        return _apply_exact(self.op, vals)

    def evaluate(self, bits: int = DEFAULT_PRECISION) -> Real:
        guard = 32 + 8 * self.depth()
        val = _eval(self, bits + guard)
        if isinstance(val, Fraction):
            return Real.from_fraction(val, bits)
        return val.with_bits(bits)

    def depth(self) -> int:
        return 1 + max((a.depth() for a in self.args), default=0)

    def __str__(self) -> str:
        if self.op == "num":
            return fraction_str(self.value) if self.value.denominator != 1 else str(self.value.numerator)
        if self.op == "sqrt":
            return f"sqrt({self.args[0]})"
        if self.op == "neg":
            return f"-({self.args[0]})"
        return f"({self.args[0]} {self.op} {self.args[1]})"


def _apply_exact(op: str, vals: list[Fraction]) -> Fraction:
    if op == "neg":
        return -vals[0]
    a, b = vals
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if b == 0:
        raise ExpressionError("division by zero")
    return a / b


def _eval(node: Expr, wbits: int):
    if node.op == "num":
        return node.value
    vals = [_eval(a, wbits) for a in node.args]
    if node.op == "sqrt":
        (v,) = vals
        if isinstance(v, Fraction):
            exact = node.exact()
            if exact is not None:
                return exact
            v = Real.from_fraction(v, wbits)
        if v.raw < 0:
            raise ExpressionError("square root of a negative number")
        return v.sqrt()
    if all(isinstance(v, Fraction) for v in vals):
        return _apply_exact(node.op, vals)
    if node.op == "neg":
        return -vals[0]
    a, b = (Real.coerce(v, wbits) for v in vals)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if b.raw == 0:
        raise ExpressionError("division by zero")
    return a / b


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = []
        for m in _TOKEN.finditer(text):
            num, kw, ch = m.groups()
            if num is not None:
                self.tokens.append(("num", num))
            elif kw is not None:
                self.tokens.append(("sqrt", kw))
            elif ch is not None and not ch.isspace():
                if ch not in "+-*/()":
                    raise ExpressionError(f"unexpected character {ch!r} in {text!r}")
                self.tokens.append((ch, ch))
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def take(self, kind):
        if self.peek() != kind:
            raise ExpressionError(f"expected {kind!r} at token {self.pos} in {self.text!r}")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok[1]

    def parse(self) -> Expr:
        if not self.tokens:
            raise ExpressionError("empty expression")
        e = self.expr()
        if self.pos != len(self.tokens):
            raise ExpressionError(f"trailing input in {self.text!r}")
        return e

    def expr(self) -> Expr:
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.take(self.peek())
            node = Expr(op, (node, self.term()))
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek() in ("*", "/"):
            op = self.take(self.peek())
            node = Expr(op, (node, self.factor()))
        return node

    def factor(self) -> Expr:
        kind = self.peek()
        if kind == "-":
            self.take("-")
            return Expr("neg", (self.factor(),))
        if kind == "num":
            return Expr("num", value=Fraction(self.take("num")))
        if kind == "sqrt":
            self.take("sqrt")
            self.take("(")
            inner = self.expr()
            self.take(")")
            return Expr("sqrt", (inner,))
        if kind == "(":
            self.take("(")
            inner = self.expr()
            self.take(")")
            return inner
        raise ExpressionError(f"unexpected token {kind!r} in {self.text!r}")


def parse_expression(text: str | int) -> Expr:
    if isinstance(text, bool):
        raise ExpressionError("booleans are not numbers")
    if isinstance(text, int):
        return Expr("num", value=Fraction(text))
    if not isinstance(text, str):
        raise ExpressionError(f"expression must be a string or integer, got {type(text).__name__}")
    return _Parser(text).parse()


def eval_expression(e: Expr | str | int, bits: int = DEFAULT_PRECISION) -> Real:
    if not isinstance(e, Expr):
        e = parse_expression(e)
    return e.evaluate(bits)
