"""Minimal immutable expression trees.

Nodes are built through the smart constructors (:func:`add`, :func:`mul`,
:func:`power`, ...) which fold constants and flatten nested sums and
products. Nothing else is simplified; equality is structural.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterable, Mapping

__all__ = [
    "Expr", "Const", "Var", "Add", "Mul", "Pow", "Neg", "Func",
    "ExpressionError", "EvaluationError", "NonPolynomialError",
    "const", "var", "add", "mul", "neg", "sub", "power", "func",
    "differentiate", "evaluate", "substitute", "collect_monomials",
    "ZERO", "ONE", "FUNCTIONS",
]

FUNCTIONS = ("exp", "ln", "sin", "cos", "sqrt")


class ExpressionError(ValueError):
    pass


class EvaluationError(ExpressionError):
    """Domain error or unbound variable during evaluation."""


class NonPolynomialError(ExpressionError):
    pass


class Expr:
    __slots__ = ("_hash", "_free")

    def _key(self):
        raise NotImplementedError

    def __hash__(self):
        try:
            return self._hash
        except AttributeError:
            h = hash((type(self).__name__, self._key()))
            object.__setattr__(self, "_hash", h)
            return h

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or hash(self) != hash(other):
            return False
        return self._key() == other._key()

    def __setattr__(self, name, value):
        raise AttributeError("expressions are immutable")

    def __reduce__(self):
        # constructor arguments; multi-argument nodes use a tuple key
        key = self._key()
        return type(self), key if isinstance(self, (Pow, Func)) else (key,)

    @property
    def free_vars(self) -> frozenset:
        try:
            return self._free
        except AttributeError:
            fv = self._compute_free()
            object.__setattr__(self, "_free", fv)
            return fv

    def _compute_free(self) -> frozenset:
        out = frozenset()
        for ch in self.children:
            out |= ch.free_vars
        return out

    @property
    def children(self) -> tuple:
        return ()

    # operator sugar, used heavily by detsys
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        return power(self, n)

    def __repr__(self):
        return f"<{type(self).__name__} {self}>"


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        value = float(value)
        if not math.isfinite(value):
            raise ExpressionError(f"non-finite constant {value!r}")
        object.__setattr__(self, "value", value)

    def _key(self):
        return self.value

    def __str__(self):
        v = self.value
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        object.__setattr__(self, "name", name)

    def _key(self):
        return self.name

    def _compute_free(self):
        return frozenset((self.name,))

    def __str__(self):
        return self.name


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: tuple):
        object.__setattr__(self, "terms", tuple(terms))

    def _key(self):
        return self.terms

    @property
    def children(self):
        return self.terms

    def __str__(self):
        out = str(self.terms[0])
        for t in self.terms[1:]:
            if isinstance(t, Neg):
                out += f" - {_wrap(t.arg, 2)}"
            else:
                out += f" + {t}"
        return out


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: tuple):
        object.__setattr__(self, "factors", tuple(factors))

    def _key(self):
        return self.factors

    @property
    def children(self):
        return self.factors

    def __str__(self):
        return "*".join(_wrap(f, 3) for f in self.factors)


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base: Expr, exp: int):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exp", int(exp))

    def _key(self):
        return (self.base, self.exp)

    @property
    def children(self):
        return (self.base,)

    def __str__(self):
        e = str(self.exp) if self.exp >= 0 else f"({self.exp})"
        return f"{_wrap(self.base, 5)}^{e}"


class Neg(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        object.__setattr__(self, "arg", arg)

    def _key(self):
        return self.arg

    @property
    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"-{_wrap(self.arg, 3)}"


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        if name not in FUNCTIONS:
            raise ExpressionError(f"unknown function {name!r}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "arg", arg)

    def _key(self):
        return (self.name, self.arg)

    @property
    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"{self.name}({self.arg})"


def _prec(e: Expr) -> int:
    if isinstance(e, Add):
        return 1
    if isinstance(e, Neg) or (isinstance(e, Const) and e.value < 0):
        return 2
    if isinstance(e, Mul):
        return 3
    if isinstance(e, Pow):
        return 4
    return 5


def _wrap(e: Expr, min_prec: int) -> str:
    s = str(e)
    return f"({s})" if _prec(e) < min_prec else s


ZERO = Const(0.0)
ONE = Const(1.0)


def _lift(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)):
        return Const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


def const(value: float) -> Const:
    return Const(value)


def var(name: str) -> Var:
    return Var(name)


def add(*terms) -> Expr:
    flat = []
    total = 0.0
    for t in map(_lift, terms):
        items = t.terms if isinstance(t, Add) else (t,)
        for s in items:
            if isinstance(s, Const):
                total += s.value
            else:
                flat.append(s)
    if total != 0.0 or not flat:
        flat.append(Const(total))
    if len(flat) == 1:
        return flat[0]
    return Add(tuple(flat))


def mul(*factors) -> Expr:
    flat = []
    coeff = 1.0
    stack = list(map(_lift, reversed(factors)))
    while stack:
        s = stack.pop()
        if isinstance(s, Neg):
            coeff = -coeff
            stack.append(s.arg)
        elif isinstance(s, Mul):
            stack.extend(reversed(s.factors))
        elif isinstance(s, Const):
            coeff *= s.value
        else:
            flat.append(s)
    if coeff == 0.0:
        return ZERO
    if not flat:
        return Const(coeff)
    if coeff == 1.0:
        return flat[0] if len(flat) == 1 else Mul(tuple(flat))
    if coeff == -1.0:
        return Neg(flat[0] if len(flat) == 1 else Mul(tuple(flat)))
    return Mul((Const(coeff), *flat))


def neg(e) -> Expr:
    e = _lift(e)
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Neg):
        return e.arg
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        return mul(Const(-e.factors[0].value), *e.factors[1:])
    return Neg(e)


def sub(a, b) -> Expr:
    return add(a, neg(b))


def power(base, n: int) -> Expr:
    base = _lift(base)
    if int(n) != n:
        raise ExpressionError("only integer exponents are supported")
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return base
    if isinstance(base, Const):
        if base.value == 0.0 and n < 0:
            return Pow(base, n)  # left for evaluate to reject
        try:
            v = base.value ** n
        except OverflowError:
            return Pow(base, n)
        if math.isfinite(v):
            return Const(v)
        return Pow(base, n)
    if isinstance(base, Pow):
        return power(base.base, base.exp * n)
    return Pow(base, n)


_FUNC_IMPL = {
    "exp": math.exp,
    "ln": math.log,
    "sin": math.sin,
    "cos": math.cos,
    "sqrt": math.sqrt,
}


def _apply(name: str, x: float) -> float:
    if name == "ln" and x <= 0.0:
        raise EvaluationError(f"ln of non-positive value {float(x)!r}")
    if name == "sqrt" and x < 0.0:
        raise EvaluationError(f"sqrt of negative value {float(x)!r}")
    try:
        y = _FUNC_IMPL[name](x)
    except OverflowError:
        raise EvaluationError(f"{name}({float(x)!r}) overflows") from None
    return y


def func(name: str, arg) -> Expr:
    arg = _lift(arg)
    if isinstance(arg, Const):
        try:
            return Const(_apply(name, arg.value))
        except (EvaluationError, ExpressionError):
            pass
    return Func(name, arg)


@lru_cache(maxsize=None)
def differentiate(e: Expr, v: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to variable ``v``."""
    if v not in e.free_vars:
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Add):
        return add(*(differentiate(t, v) for t in e.terms))
    if isinstance(e, Mul):
        fs = e.factors
        parts = []
        for i, f in enumerate(fs):
            df = differentiate(f, v)
            if df == ZERO:
                continue
            parts.append(mul(*fs[:i], df, *fs[i + 1:]))
        return add(*parts)
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, v))
    if isinstance(e, Pow):
        return mul(Const(e.exp), power(e.base, e.exp - 1), differentiate(e.base, v))
    if isinstance(e, Func):
        a = e.arg
        da = differentiate(a, v)
        if e.name == "exp":
            return mul(e, da)
        if e.name == "ln":
            return mul(da, power(a, -1))
        if e.name == "sin":
            return mul(func("cos", a), da)
        if e.name == "cos":
            return neg(mul(func("sin", a), da))
        if e.name == "sqrt":
            return mul(Const(0.5), da, power(e, -1))
    raise ExpressionError(f"cannot differentiate {e!r}")


def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate ``e`` numerically; raises :class:`EvaluationError` on domain errors."""
    memo: dict = {}
    y = _eval(e, bindings, memo)
    if not math.isfinite(y):
        raise EvaluationError(f"non-finite value while evaluating {e}")
    return y


def _eval(e: Expr, b: Mapping[str, float], memo: dict) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return float(b[e.name])
        except KeyError:
            raise EvaluationError(f"unbound variable {e.name!r}") from None
    key = id(e)
    hit = memo.get(key)
    if hit is not None:
        return hit[1]
    if isinstance(e, Add):
        y = math.fsum(_eval(t, b, memo) for t in e.terms)
    elif isinstance(e, Mul):
        y = 1.0
        for f in e.factors:
            y *= _eval(f, b, memo)
    elif isinstance(e, Neg):
        y = -_eval(e.arg, b, memo)
    elif isinstance(e, Pow):
        x = _eval(e.base, b, memo)
        if x == 0.0 and e.exp < 0:
            raise EvaluationError("division by zero")
        try:
            y = x ** e.exp
        except OverflowError:
            raise EvaluationError("overflow in power") from None
    elif isinstance(e, Func):
        y = _apply(e.name, _eval(e.arg, b, memo))
    else:
        raise ExpressionError(f"unknown node {e!r}")
    memo[key] = (e, y)
    return y


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions (simultaneously)."""
    mapping = {k: _lift(v) for k, v in mapping.items()}
    memo: dict = {}

    def go(n: Expr) -> Expr:
        if not (n.free_vars & mapping.keys()):
            return n
        hit = memo.get(n)
        if hit is not None:
            return hit
        if isinstance(n, Var):
            out = mapping[n.name]
        elif isinstance(n, Add):
            out = add(*map(go, n.terms))
        elif isinstance(n, Mul):
            out = mul(*map(go, n.factors))
        elif isinstance(n, Neg):
            out = neg(go(n.arg))
        elif isinstance(n, Pow):
            out = power(go(n.base), n.exp)
        elif isinstance(n, Func):
            out = func(n.name, go(n.arg))
        else:
            raise ExpressionError(f"unknown node {n!r}")
        memo[n] = out
        return out

    return go(e)


def collect_monomials(e: Expr, indets: Iterable[str]) -> dict[tuple[int, ...], Expr]:
    """Split ``e`` as a polynomial in ``indets``.

    Returns a map from exponent tuples (one entry per indeterminate) to
    coefficient expressions free of the indeterminates. Monomials whose
    coefficient folds to zero are dropped.
    """
    indets = tuple(indets)
    index = {name: i for i, name in enumerate(indets)}
    zero_deg = (0,) * len(indets)
    memo: dict = {}

    def plus(p, q):
        out = dict(p)
        for m, c in q.items():
            out[m] = add(out[m], c) if m in out else c
        return out

    def times(p, q):
        out: dict = {}
        for m1, c1 in p.items():
            for m2, c2 in q.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                c = mul(c1, c2)
                out[m] = add(out[m], c) if m in out else c
        return out

    def go(n: Expr) -> dict:
        if not (n.free_vars & index.keys()):
            return {zero_deg: n}
        hit = memo.get(n)
        if hit is not None:
            return hit
        if isinstance(n, Var):
            deg = [0] * len(indets)
            deg[index[n.name]] = 1
            out = {tuple(deg): ONE}
        elif isinstance(n, Add):
            out = {}
            for t in n.terms:
                out = plus(out, go(t))
        elif isinstance(n, Mul):
            out = {zero_deg: ONE}
            for f in n.factors:
                out = times(out, go(f))
        elif isinstance(n, Neg):
            out = {m: neg(c) for m, c in go(n.arg).items()}
        elif isinstance(n, Pow):
            if n.exp < 0:
                raise NonPolynomialError(f"negative power of an indeterminate in {n}")
            base = go(n.base)
            out = {zero_deg: ONE}
            for _ in range(n.exp):
                out = times(out, base)
        else:
            raise NonPolynomialError(f"non-polynomial dependence on indeterminates in {n}")
        memo[n] = out
        return out

    return {m: c for m, c in go(e).items() if c != ZERO}
