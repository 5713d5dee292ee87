"""Symbolic kernel: expressions over the jet chart of the wave family.

Expressions are sympy trees over a fixed coordinate chart:

* base coordinates ``x, y, t`` and the dependent variable ``u``,
* first-jet coordinates ``v1 = u_x``, ``v2 = u_y``, ``v3 = u_t``,
* the group parameter ``eps``,
* opaque *formal functions* (arbitrary smooth functions such as ``m(u)``
  or ``eta(x, y, t, u)``).  Formal functions are closed under
  differentiation: each derivative is a fresh atom carrying a multi-index,
  and two applications are equal iff name, arguments and multi-index match.

Constants are exact rationals, so identities decided by :func:`normalize`
are exact.  Floats enter only through :class:`Binding` at evaluation time.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import sympy as sp

Expr = sp.Expr

# Fixed chart symbols.
X, Y, T, U = sp.symbols("x y t u")
V1, V2, V3 = sp.symbols("v1 v2 v3")
EPS = sp.Symbol("eps")

BASE_COORDS = (X, Y, T)
JET_COORDS = (V1, V2, V3)
CHART = (X, Y, T, U, V1, V2, V3)

#: axis name -> (base coordinate, matching jet coordinate)
AXES = {"x": (X, V1), "y": (Y, V2), "t": (T, V3)}

RESERVED = {
    "x": X, "y": Y, "t": T, "u": U,
    "u_x": V1, "u_y": V2, "u_t": V3,
    "v1": V1, "v2": V2, "v3": V3,
    "eps": EPS,
}
_CANONICAL_NAME = {V1: "u_x", V2: "u_y", V3: "u_t"}

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_FUNC_NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9]*\Z")  # no underscore: keeps derivative markers unambiguous
_MARKER_RE = re.compile(r"(?P<base>[A-Za-z][A-Za-z0-9]*)_(?P<marks>(?:d\d+)+)\Z")


class ExprError(ValueError):
    """Base class for kernel errors."""


class ParseError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DomainError(ArithmeticError):
    """Numeric evaluation hit a singular or non-finite subexpression."""

    def __init__(self, message: str, subexpr: Expr):
        super().__init__(f"{message}: {to_text(subexpr)}")
        self.subexpr = subexpr


class BindingError(ExprError):
    """A symbol or formal function has no entry in the binding."""


# ---------------------------------------------------------------------------
# formal functions

_FORMAL_CACHE: dict[tuple[str, int, tuple[int, ...]], type] = {}


def formal_function(name: str, nargs: int, dorders: tuple[int, ...] | None = None) -> type:
    """Return the sympy Function class for a formal function atom.

    ``dorders`` is the derivative multi-index, one entry per argument slot;
    the default is the underived function itself.  Differentiation bumps the
    multi-index, so sympy's chain rule produces fresh atoms automatically.
    """
    if not _FUNC_NAME_RE.match(name):
        raise ExprError(f"invalid formal function name {name!r} (letters and digits only)")
    if nargs < 1:
        raise ExprError("formal functions need at least one argument")
    if dorders is None:
        dorders = (0,) * nargs
    if len(dorders) != nargs or any(k < 0 for k in dorders):
        raise ExprError(f"bad derivative multi-index {dorders!r} for {name!r}")
    key = (name, nargs, tuple(dorders))
    cls = _FORMAL_CACHE.get(key)
    if cls is None:
        suffix = "".join(f"d{i + 1}" * k for i, k in enumerate(dorders))
        clsname = name + ("_" + suffix if suffix else "")

        def fdiff(self, argindex=1):
            bumped = list(type(self)._dorders)
            bumped[argindex - 1] += 1
            return formal_function(type(self)._base, type(self)._numargs, tuple(bumped))(*self.args)

        cls = type(clsname, (sp.Function,), {
            "_base": name,
            "_numargs": nargs,
            "_dorders": tuple(dorders),
            "nargs": nargs,
            "fdiff": fdiff,
        })
        _FORMAL_CACHE[key] = cls
    return cls


def is_formal(e: Expr) -> bool:
    return isinstance(e, sp.Function) and hasattr(type(e), "_base")


def formal_atoms(e: Expr) -> set:
    """All formal-function applications occurring in ``e``."""
    return {a for a in e.atoms(sp.Function) if is_formal(a)}


# ---------------------------------------------------------------------------
# workspace

class Context:
    """Registry of user symbols and formal functions for a workspace.

    Names are unique: a name registered as a symbol cannot be reused as a
    function and vice versa, and the chart names (x, y, t, u, u_x, ...) are
    reserved.
    """

    def __init__(self):
        self._symbols: dict[str, sp.Symbol] = {}
        self._functions: dict[str, int] = {}

    def symbol(self, name: str) -> sp.Symbol:
        if name in RESERVED:
            return RESERVED[name]
        if not _IDENT_RE.match(name):
            raise ExprError(f"invalid symbol name {name!r}")
        if name in self._functions:
            raise ExprError(f"{name!r} is already a function in this workspace")
        return self._symbols.setdefault(name, sp.Symbol(name))

    def function(self, name: str, nargs: int = 1):
        """Register a formal function and return its application class."""
        if name in RESERVED or name in self._symbols:
            raise ExprError(f"{name!r} is already a symbol in this workspace")
        known = self._functions.get(name)
        if known is not None and known != nargs:
            raise ExprError(f"function {name!r} already registered with {known} argument(s)")
        cls = formal_function(name, nargs)
        self._functions[name] = nargs
        return cls

    def lookup_symbol(self, name: str) -> sp.Symbol | None:
        return RESERVED.get(name) or self._symbols.get(name)

    def lookup_function(self, name: str) -> int | None:
        return self._functions.get(name)


# ---------------------------------------------------------------------------
# parser

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>\d+(?:\.\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<prime>')"
    r"|(?P<op>[-+*/^(),])"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive-descent parser for the expression grammar:

    expr   := ['-'] term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' ['-'] integer)?
    base   := number | ident | ident "'"* '(' expr (',' expr)* ')' | '(' expr ')'
    """

    def __init__(self, text: str, ctx: Context):
        self.text = text
        self.ctx = ctx
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, text, pos = self.peek()
        if (kind, text) not in (("op", op), ("prime", op)):
            raise ParseError(f"expected {op!r}", pos)
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos)
        return e

    def expr(self) -> Expr:
        negate = False
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            negate = True
        e = self.term()
        if negate:
            e = -e
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            _, op, _ = self.advance()
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            _, op, _ = self.advance()
            rhs = self.factor()
            e = e * rhs if op == "*" else e / rhs
        return e

    def factor(self) -> Expr:
        e = self.base()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            sign = 1
            if self.peek()[:2] == ("op", "-"):
                self.advance()
                sign = -1
            kind, text, pos = self.peek()
            if kind != "num" or "." in text:
                raise ParseError("expected an integer exponent", pos)
            self.advance()
            e = e ** (sign * int(text))
        return e

    def base(self) -> Expr:
        kind, text, pos = self.peek()
        if kind == "num":
            self.advance()
            return sp.Rational(Fraction(text))
        if kind == "op" and text == "(":
            self.advance()
            e = self.expr()
            self.expect_op(")")
            return e
        if kind == "ident":
            self.advance()
            primes = 0
            while self.peek()[0] == "prime":
                self.advance()
                primes += 1
            if self.peek()[:2] == ("op", "("):
                return self.call(text, primes, pos)
            if primes:
                raise ParseError(f"{text!r} with primes must be applied to arguments", pos)
            sym = self.ctx.lookup_symbol(text)
            if sym is None:
                raise ParseError(f"unknown symbol {text!r}", pos)
            return sym
        raise ParseError(f"unexpected {text!r}" if text else "unexpected end of input", pos)

    def call(self, name: str, primes: int, pos: int) -> Expr:
        base, dorders = self.resolve_function(name, primes, pos)
        self.expect_op("(")
        args = [self.expr()]
        while self.peek()[:2] == ("op", ","):
            self.advance()
            args.append(self.expr())
        self.expect_op(")")
        nargs = self.ctx.lookup_function(base)
        if len(args) != nargs:
            raise ParseError(f"{base!r} takes {nargs} argument(s), got {len(args)}", pos)
        return formal_function(base, nargs, dorders)(*args)

    def resolve_function(self, name: str, primes: int, pos: int) -> tuple[str, tuple[int, ...]]:
        nargs = self.ctx.lookup_function(name)
        if nargs is not None:
            if primes and nargs != 1:
                raise ParseError(f"prime derivative on {name!r} is ambiguous; use _d<k> markers", pos)
            dorders = [0] * nargs
            if primes:
                dorders[0] = primes
            return name, tuple(dorders)
        if primes == 0:
            m = _MARKER_RE.match(name)
            if m and self.ctx.lookup_function(m.group("base")) is not None:
                base = m.group("base")
                nargs = self.ctx.lookup_function(base)
                dorders = [0] * nargs
                for mark in re.findall(r"d(\d+)", m.group("marks")):
                    slot = int(mark)
                    if not 1 <= slot <= nargs:
                        raise ParseError(f"derivative marker d{slot} out of range for {base!r}", pos)
                    dorders[slot - 1] += 1
                return base, tuple(dorders)
        raise ParseError(f"unknown function {name!r}", pos)


def parse(text: str, ctx: Context | None = None) -> Expr:
    """Parse ``text`` into a canonical expression.

    ``u_x``, ``u_y``, ``u_t`` map to the jet coordinates; ``m'(u)`` maps to
    the first formal derivative of a registered function ``m``.
    """
    return _Parser(text, ctx or Context()).parse()


# ---------------------------------------------------------------------------
# printer

def _fmt_function(e: Expr) -> str:
    cls = type(e)
    if cls._numargs == 1:
        name = cls._base + "'" * cls._dorders[0]
    else:
        suffix = "".join(f"d{i + 1}" * k for i, k in enumerate(cls._dorders))
        name = cls._base + ("_" + suffix if suffix else "")
    return f"{name}({', '.join(_fmt(a, 0) for a in e.args)})"


def _fmt_atom(e: Expr) -> str:
    if e in _CANONICAL_NAME:
        return _CANONICAL_NAME[e]
    if isinstance(e, sp.Symbol):
        return e.name
    if is_formal(e):
        return _fmt_function(e)
    if isinstance(e, sp.Integer):
        return str(int(e))
    raise ExprError(f"cannot print atom {sp.srepr(e)}")


def _split_mul(e: Expr):
    """Split a product into (sign, numerator parts, denominator parts)."""
    sign = 1
    num: list[str] = []
    den: list[str] = []
    factors = e.args if isinstance(e, sp.Mul) else (e,)
    for a in factors:
        if isinstance(a, sp.Rational):
            if a < 0:
                sign = -sign
                a = -a
            if a.p != 1:
                num.append(str(a.p))
            if a.q != 1:
                den.append(str(a.q))
        elif isinstance(a, sp.Pow) and isinstance(a.exp, sp.Rational) and a.exp < 0:
            den.append(_fmt_pow(sp.Pow(a.base, -a.exp)))
        else:
            num.append(_fmt(a, 2))
    if not num:
        num.append("1")
    return sign, num, den


def _fmt_pow(e: Expr) -> str:
    if isinstance(e, sp.Pow):
        exp = e.exp
        if not (isinstance(exp, sp.Integer) and exp > 0):
            raise ExprError(f"cannot print exponent {exp} within the grammar")
        return f"{_fmt(e.base, 3)}^{int(exp)}"
    return _fmt(e, 3)


def _fmt(e: Expr, prec: int) -> str:
    # prec: 0 add-level, 2 mul-level, 3 pow/atom-level
    if isinstance(e, sp.Add):
        terms = e.as_ordered_terms()
        parts = [_fmt(terms[0], 0)]
        for term in terms[1:]:
            s = _fmt(term, 0)
            parts.append("- " + s[1:] if s.startswith("-") else "+ " + s)
        out = " ".join(parts)
        return f"({out})" if prec >= 2 else out
    if isinstance(e, (sp.Mul, sp.Rational)) or (
        isinstance(e, sp.Pow) and isinstance(e.exp, sp.Rational) and e.exp < 0
    ):
        sign, num, den = _split_mul(e)
        out = "*".join(num)
        for d in den:
            out += "/" + d
        if sign < 0:
            out = "-" + out
        wrap = prec >= 3 or (prec >= 2 and sign < 0)
        return f"({out})" if wrap else out
    if isinstance(e, sp.Pow):
        return _fmt_pow(e)
    return _fmt_atom(e)


def to_text(e: Expr) -> str:
    """Render ``e`` in the text grammar accepted by :func:`parse`."""
    return _fmt(sp.sympify(e), 0)


# ---------------------------------------------------------------------------
# calculus and rewriting

def partial(e: Expr, s: sp.Symbol) -> Expr:
    """Formal partial derivative; other symbols are held constant."""
    return sp.diff(sp.sympify(e), s)


def total_derivative(e: Expr, axis) -> Expr:
    """Total derivative D_i = d/dx^i + v_i d/du on functions of the base chart.

    ``axis`` is 'x', 'y', 't' or the matching base symbol.  Raises if ``e``
    contains jet coordinates, where D is not defined.
    """
    if isinstance(axis, str):
        try:
            base, jet = AXES[axis]
        except KeyError:
            raise ExprError(f"unknown axis {axis!r}") from None
    else:
        for base, jet in AXES.values():
            if axis == base:
                break
        else:
            raise ExprError(f"unknown axis {axis!r}")
    e = sp.sympify(e)
    jets = e.free_symbols & set(JET_COORDS)
    if jets:
        names = ", ".join(sorted(_CANONICAL_NAME[j] for j in jets))
        raise ExprError(f"total derivative undefined: expression contains jet variables ({names})")
    return sp.diff(e, base) + jet * sp.diff(e, U)


def substitute(e: Expr, replacements: Mapping) -> Expr:
    """Simultaneous substitution followed by canonicalization."""
    return sp.sympify(e).subs(dict(replacements), simultaneous=True)


def normalize(e: Expr) -> Expr:
    """Unique rational normal form.

    Expands over a common denominator and cancels the polynomial gcd, so
    ``normalize(a) == normalize(b)`` exactly when ``a - b`` vanishes as a
    rational function of the symbols and formal-function atoms.
    """
    return sp.cancel(sp.sympify(e))


def is_zero(e: Expr) -> bool:
    """Exact zero test as a rational function."""
    e = sp.sympify(e)
    if e.is_zero:
        return True
    flat = sp.expand(e)
    if flat.is_zero:
        return True
    return normalize(flat) == 0


def depends_on(e: Expr, s: sp.Symbol) -> bool:
    """Structural dependence: the partial derivative does not normalize to 0."""
    return not is_zero(partial(e, s))


# ---------------------------------------------------------------------------
# numeric evaluation

#: numeric stand-in for a formal function: called with the argument tuple and
#: a derivative multi-index, returns the derivative value at those arguments.
NumericFunction = Callable[[tuple[float, ...], tuple[int, ...]], float]


def derivative_table(*derivs: Callable[[float], float]) -> NumericFunction:
    """Numeric unary function from the list f, f', f'', ... of callables."""

    def call(args: tuple[float, ...], dorders: tuple[int, ...]) -> float:
        (k,) = dorders
        if k >= len(derivs):
            raise BindingError(f"derivative of order {k} not supplied")
        return float(derivs[k](args[0]))

    return call


def expr_function(params: Sequence[sp.Symbol], body: Expr) -> NumericFunction:
    """Numeric function (with exact derivatives) defined by an expression."""
    body = sp.sympify(body)
    extra = body.free_symbols - set(params)
    if extra:
        raise ExprError(f"definition depends on unbound symbols {sorted(map(str, extra))}")
    cache: dict[tuple[int, ...], Callable] = {}

    def call(args: tuple[float, ...], dorders: tuple[int, ...]) -> float:
        fn = cache.get(dorders)
        if fn is None:
            d = body
            for p, k in zip(params, dorders):
                d = sp.diff(d, p, k)
            fn = sp.lambdify(params, d, modules="math")
            cache[dorders] = fn
        return float(fn(*args))

    return call


class Binding:
    """Numeric values for symbols plus numeric callables for formal functions."""

    def __init__(self, values: Mapping | None = None,
                 functions: Mapping[str, NumericFunction] | None = None):
        self.values: dict[str, float] = {}
        self.functions: dict[str, NumericFunction] = dict(functions or {})
        for key, val in (values or {}).items():
            name = key if isinstance(key, str) else key.name
            sym = RESERVED.get(name)
            self.values[sym.name if sym is not None else name] = float(val)

    def value_of(self, s: sp.Symbol) -> float:
        try:
            return self.values[s.name]
        except KeyError:
            raise BindingError(f"no value bound for symbol {s.name!r}") from None

    def function_of(self, base: str) -> NumericFunction:
        try:
            return self.functions[base]
        except KeyError:
            raise BindingError(f"no numeric function bound for {base!r}") from None


_SINGULAR = 1e-12


def evaluate(e: Expr, binding: Binding) -> float:
    """Evaluate to an IEEE double; singular denominators raise DomainError."""
    e = sp.sympify(e)

    def rec(node: Expr) -> float:
        if isinstance(node, sp.Rational):
            return float(node)
        if isinstance(node, sp.Symbol):
            return binding.value_of(node)
        if isinstance(node, sp.Add):
            return math.fsum(rec(a) for a in node.args)
        if isinstance(node, sp.Mul):
            out = 1.0
            for a in node.args:
                out *= rec(a)
            return out
        if isinstance(node, sp.Pow):
            base = rec(node.base)
            exp = node.exp
            if isinstance(exp, sp.Rational) and exp < 0 and abs(base) < _SINGULAR:
                raise DomainError("singular denominator", node)
            try:
                return float(base) ** float(exp)
            except (OverflowError, ValueError, ZeroDivisionError):
                raise DomainError("numeric domain error", node) from None
        if is_formal(node):
            fn = binding.function_of(type(node)._base)
            args = tuple(rec(a) for a in node.args)
            return float(fn(args, type(node)._dorders))
        if isinstance(node, sp.Float):
            return float(node)
        raise ExprError(f"cannot evaluate node {sp.srepr(node)}")

    out = rec(e)
    if not math.isfinite(out):
        raise DomainError("evaluation produced a non-finite value", e)
    return out


def compile_fast(e: Expr, functions: Mapping[str, NumericFunction] | None = None,
                 args: Sequence[sp.Symbol] = CHART) -> Callable[..., float]:
    """Compile an expression to a fast positional callable.

    Formal atoms are routed to entries of ``functions`` keyed by base name.
    Singularity checks are the caller's job on this fast path; division by
    zero surfaces as ZeroDivisionError.
    """
    e = sp.sympify(e)
    free = e.free_symbols - set(args)
    if free:
        raise ExprError(f"expression depends on unbound symbols {sorted(map(str, free))}")
    functions = functions or {}
    funcmap: dict[str, Callable] = {}
    for atom in formal_atoms(e):
        cls = type(atom)
        name = cls.__name__
        if name in funcmap:
            continue
        fn = functions.get(cls._base)
        if fn is None:
            raise BindingError(f"no numeric function bound for {cls._base!r}")
        funcmap[name] = (lambda f, d: lambda *a: f(a, d))(fn, cls._dorders)
    return sp.lambdify(tuple(args), e, modules=[funcmap, "math"])
