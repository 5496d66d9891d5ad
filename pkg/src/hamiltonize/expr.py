"""Symbolic expressions in the single variable ``r1``.

Constraint coefficients are supplied as strings over this grammar::

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' ('-'? integer))?
    atom   := number | 'r1' | func '(' expr ')' | '(' expr ')'
    func   := sin | cos | tan | exp | ln | sqrt

``^`` binds tighter than unary minus, so ``-r1^2`` parses as ``-(r1^2)``.
Exponents are integer literals.  Whitespace is ignored.

Derivatives are structural (exact), never finite differences; downstream
tensors need coefficient derivatives up to fourth order and rank decisions
at 1e-10 thresholds would not survive numerical differentiation.

Evaluation reports domain errors (``ln`` of a non-positive number, division
by zero, overflow) instead of returning non-finite values.  ``compile()``
returns a plain Python callable for use in integration inner loops; it obeys
the same domain-error contract as ``eval``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ExprDomainError, ExprParseError

__all__ = ["Expr", "parse_expr", "diff_expr", "const", "var"]


@dataclass(frozen=True)
class Expr:
    """Base class for expression nodes.  Nodes are immutable and hashable."""

    def __add__(self, other):
        return _add(self, _wrap(other))

    def __radd__(self, other):
        return _add(_wrap(other), self)

    def __sub__(self, other):
        return _sub(self, _wrap(other))

    def __rsub__(self, other):
        return _sub(_wrap(other), self)

    def __mul__(self, other):
        return _mul(self, _wrap(other))

    def __rmul__(self, other):
        return _mul(_wrap(other), self)

    def __truediv__(self, other):
        return _div(self, _wrap(other))

    def __rtruediv__(self, other):
        return _div(_wrap(other), self)

    def __pow__(self, n: int):
        return _pow(self, n)

    def __neg__(self):
        return _neg(self)

    def eval(self, r1: float) -> float:
        """Evaluate at a point, raising ExprDomainError outside the domain."""
        try:
            value = self._eval(r1)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise ExprDomainError(f"{exc} while evaluating {self} at r1={r1!r}") from exc
        if not math.isfinite(value):
            raise ExprDomainError(f"non-finite value of {self} at r1={r1!r}")
        return value

    def diff(self) -> "Expr":
        """Structural derivative with respect to r1."""
        raise NotImplementedError

    def compile(self):
        """Compile to a fast ``float -> float`` callable with eval's contract."""
        raw = eval("lambda r1: " + self._code(), {"math": math})
        label = str(self)

        def fn(r1: float) -> float:
            try:
                value = raw(r1)
            except (ValueError, ZeroDivisionError, OverflowError) as exc:
                raise ExprDomainError(f"{exc} while evaluating {label} at r1={r1!r}") from exc
            if not math.isfinite(value):
                raise ExprDomainError(f"non-finite value of {label} at r1={r1!r}")
            return value

        return fn

    def is_constant(self) -> bool:
        """True when the derivative folds to the zero constant."""
        d = self.diff()
        return isinstance(d, Const) and d.value == 0.0

    def _eval(self, r1: float) -> float:
        raise NotImplementedError

    def _code(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def _eval(self, r1):
        return self.value

    def diff(self):
        return Const(0.0)

    def _code(self):
        return repr(self.value)

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expr):
    def _eval(self, r1):
        return r1

    def diff(self):
        return Const(1.0)

    def _code(self):
        return "r1"

    def __str__(self):
        return "r1"


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr

    def _eval(self, r1):
        return self.left._eval(r1) + self.right._eval(r1)

    def diff(self):
        return _add(self.left.diff(), self.right.diff())

    def _code(self):
        return f"({self.left._code()} + {self.right._code()})"

    def __str__(self):
        return f"({self.left} + {self.right})"


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr

    def _eval(self, r1):
        return self.left._eval(r1) - self.right._eval(r1)

    def diff(self):
        return _sub(self.left.diff(), self.right.diff())

    def _code(self):
        return f"({self.left._code()} - {self.right._code()})"

    def __str__(self):
        return f"({self.left} - {self.right})"


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr

    def _eval(self, r1):
        return self.left._eval(r1) * self.right._eval(r1)

    def diff(self):
        return _add(
            _mul(self.left.diff(), self.right),
            _mul(self.left, self.right.diff()),
        )

    def _code(self):
        return f"({self.left._code()} * {self.right._code()})"

    def __str__(self):
        return f"({self.left} * {self.right})"


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr

    def _eval(self, r1):
        den = self.right._eval(r1)
        if den == 0.0:
            raise ZeroDivisionError("division by zero")
        return self.left._eval(r1) / den

    def diff(self):
        # (u/v)' = (u'v - uv') / v^2
        return _div(
            _sub(_mul(self.left.diff(), self.right), _mul(self.left, self.right.diff())),
            _pow(self.right, 2),
        )

    def _code(self):
        return f"({self.left._code()} / {self.right._code()})"

    def __str__(self):
        return f"({self.left} / {self.right})"


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def _eval(self, r1):
        return self.base._eval(r1) ** self.exponent

    def diff(self):
        n = self.exponent
        return _mul(_mul(Const(float(n)), _pow(self.base, n - 1)), self.base.diff())

    def _code(self):
        return f"({self.base._code()} ** {self.exponent})"

    def __str__(self):
        return f"({self.base}^{self.exponent})"


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def _eval(self, r1):
        return -self.arg._eval(r1)

    def diff(self):
        return _neg(self.arg.diff())

    def _code(self):
        return f"(-{self.arg._code()})"

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class Sin(Expr):
    arg: Expr

    def _eval(self, r1):
        return math.sin(self.arg._eval(r1))

    def diff(self):
        return _mul(Cos(self.arg), self.arg.diff())

    def _code(self):
        return f"math.sin({self.arg._code()})"

    def __str__(self):
        return f"sin({self.arg})"


@dataclass(frozen=True)
class Cos(Expr):
    arg: Expr

    def _eval(self, r1):
        return math.cos(self.arg._eval(r1))

    def diff(self):
        return _neg(_mul(Sin(self.arg), self.arg.diff()))

    def _code(self):
        return f"math.cos({self.arg._code()})"

    def __str__(self):
        return f"cos({self.arg})"


@dataclass(frozen=True)
class Tan(Expr):
    arg: Expr

    def _eval(self, r1):
        a = self.arg._eval(r1)
        if math.cos(a) == 0.0:
            raise ValueError("tan evaluated at a pole")
        return math.tan(a)

    def diff(self):
        # tan' = 1 + tan^2
        return _mul(_add(Const(1.0), _pow(Tan(self.arg), 2)), self.arg.diff())

    def _code(self):
        return f"math.tan({self.arg._code()})"

    def __str__(self):
        return f"tan({self.arg})"


@dataclass(frozen=True)
class ExpF(Expr):
    arg: Expr

    def _eval(self, r1):
        return math.exp(self.arg._eval(r1))

    def diff(self):
        return _mul(ExpF(self.arg), self.arg.diff())

    def _code(self):
        return f"math.exp({self.arg._code()})"

    def __str__(self):
        return f"exp({self.arg})"


@dataclass(frozen=True)
class Ln(Expr):
    arg: Expr

    def _eval(self, r1):
        a = self.arg._eval(r1)
        if a <= 0.0:
            raise ValueError("ln of a non-positive number")
        return math.log(a)

    def diff(self):
        return _div(self.arg.diff(), self.arg)

    def _code(self):
        return f"math.log({self.arg._code()})"

    def __str__(self):
        return f"ln({self.arg})"


@dataclass(frozen=True)
class Sqrt(Expr):
    arg: Expr

    def _eval(self, r1):
        a = self.arg._eval(r1)
        if a < 0.0:
            raise ValueError("sqrt of a negative number")
        return math.sqrt(a)

    def diff(self):
        return _div(self.arg.diff(), _mul(Const(2.0), Sqrt(self.arg)))

    def _code(self):
        return f"math.sqrt({self.arg._code()})"

    def __str__(self):
        return f"sqrt({self.arg})"


# --- smart constructors -------------------------------------------------
# Light constant folding keeps derivative trees from exploding; correctness
# does not depend on it.

def _wrap(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(float(value))


def _is_const(e: Expr, v: float | None = None) -> bool:
    return isinstance(e, Const) and (v is None or e.value == v)


def _fold(compute, fallback) -> Expr:
    """Fold two constants, keeping the node when the fold is not finite."""
    try:
        value = compute()
    except (OverflowError, ZeroDivisionError):
        return fallback()
    if not math.isfinite(value):
        return fallback()
    return Const(value)


def _add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return _fold(lambda: a.value + b.value, lambda: Add(a, b))
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return _fold(lambda: a.value - b.value, lambda: Sub(a, b))
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return _neg(b)
    return Sub(a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return _fold(lambda: a.value * b.value, lambda: Mul(a, b))
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Mul(a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return Const(0.0)
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return _fold(lambda: a.value / b.value, lambda: Div(a, b))
    return Div(a, b)


def _pow(base: Expr, n) -> Expr:
    if not isinstance(n, int):
        raise TypeError("exponents must be integers")
    if n == 0:
        return Const(1.0)
    if n == 1:
        return base
    if _is_const(base):
        return _fold(lambda: base.value**n, lambda: Pow(base, n))
    return Pow(base, n)


def _neg(a: Expr) -> Expr:
    if isinstance(a, Neg):
        return a.arg
    if _is_const(a):
        return Const(-a.value)
    return Neg(a)


def const(value: float) -> Expr:
    return Const(float(value))


def var() -> Expr:
    return Var()


def diff_expr(e: Expr) -> Expr:
    """Structural derivative of an expression with respect to r1."""
    return e.diff()


# --- parser ---------------------------------------------------------------

_FUNCS = {"sin": Sin, "cos": Cos, "tan": Tan, "exp": ExpF, "ln": Ln, "sqrt": Sqrt}


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str | None:
        self._skip_ws()
        if self.pos >= len(self.text):
            return None
        return self.text[self.pos]

    def take(self) -> str:
        ch = self.peek()
        self.pos += 1
        return ch

    def expect(self, ch: str):
        got = self.peek()
        if got != ch:
            raise ExprParseError(f"expected {ch!r}, found {got!r}", self.pos)
        self.pos += 1

    def number(self) -> float:
        self._skip_ws()
        start = self.pos
        n = len(self.text)
        while self.pos < n and (self.text[self.pos].isdigit() or self.text[self.pos] == "."):
            self.pos += 1
        if self.pos < n and self.text[self.pos] in "eE":
            mark = self.pos
            self.pos += 1
            if self.pos < n and self.text[self.pos] in "+-":
                self.pos += 1
            if self.pos < n and self.text[self.pos].isdigit():
                while self.pos < n and self.text[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = mark  # not an exponent, e.g. "2*exp(r1)"
        try:
            return float(self.text[start : self.pos])
        except ValueError:
            raise ExprParseError("malformed number", start) from None

    def identifier(self) -> tuple[str, int]:
        self._skip_ws()
        start = self.pos
        n = len(self.text)
        while self.pos < n and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
            self.pos += 1
        return self.text[start : self.pos], start

    def integer(self) -> int:
        self._skip_ws()
        start = self.pos
        if self.peek() == "-":
            self.pos += 1
        n = len(self.text)
        while self.pos < n and self.text[self.pos].isdigit():
            self.pos += 1
        token = self.text[start : self.pos]
        if not token or token == "-":
            raise ExprParseError("expected an integer exponent", start)
        return int(token)


def parse_expr(text: str) -> Expr:
    """Parse an expression string over the grammar in the module docstring."""
    if not isinstance(text, str) or not text.strip():
        raise ExprParseError("empty expression", 0)
    toks = _Tokens(text)
    node = _parse_sum(toks)
    if toks.peek() is not None:
        raise ExprParseError(f"unexpected {toks.peek()!r}", toks.pos)
    return node


def _parse_sum(toks: _Tokens) -> Expr:
    node = _parse_term(toks)
    while toks.peek() in ("+", "-"):
        op = toks.take()
        rhs = _parse_term(toks)
        node = _add(node, rhs) if op == "+" else _sub(node, rhs)
    return node


def _parse_term(toks: _Tokens) -> Expr:
    node = _parse_unary(toks)
    while toks.peek() in ("*", "/"):
        op = toks.take()
        rhs = _parse_unary(toks)
        node = _mul(node, rhs) if op == "*" else _div(node, rhs)
    return node


def _parse_unary(toks: _Tokens) -> Expr:
    if toks.peek() == "-":
        toks.take()
        return _neg(_parse_unary(toks))
    return _parse_power(toks)


def _parse_power(toks: _Tokens) -> Expr:
    base = _parse_atom(toks)
    if toks.peek() == "^":
        toks.take()
        return _pow(base, toks.integer())
    return base


def _parse_atom(toks: _Tokens) -> Expr:
    ch = toks.peek()
    if ch is None:
        raise ExprParseError("unexpected end of input", toks.pos)
    if ch == "(":
        toks.take()
        node = _parse_sum(toks)
        toks.expect(")")
        return node
    if ch.isdigit() or ch == ".":
        return Const(toks.number())
    if ch.isalpha() or ch == "_":
        name, start = toks.identifier()
        if name == "r1":
            return Var()
        if name in _FUNCS:
            toks.expect("(")
            arg = _parse_sum(toks)
            toks.expect(")")
            return _FUNCS[name](arg)
        raise ExprParseError(f"unknown identifier {name!r}", start)
    raise ExprParseError(f"unexpected {ch!r}", toks.pos)
