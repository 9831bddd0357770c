"""Truncated multivariate Taylor arithmetic over expression trees.

Evaluating an expression on series yields every partial derivative up to a
given total order at one point, at the cost of a handful of small
convolutions per node. The jet module relies on this to evaluate prolonged
coefficient matrices without building their symbolic entries.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .expr import Add, Const, EvaluationError, Expr, ExpressionError, Func, Mul, Neg, Pow, Var

__all__ = ["multi_indices", "SeriesSpace", "taylor", "derivative_table"]


@lru_cache(maxsize=None)
def multi_indices(nvars: int, order: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices of exactly ``order``, in descending lexicographic order."""
    if nvars == 0:
        return ((),) if order == 0 else ()
    out = []
    for first in range(order, -1, -1):
        for rest in multi_indices(nvars - 1, order - first):
            out.append((first,) + rest)
    return tuple(out)


class SeriesSpace:
    """Index tables for series in ``nvars`` variables truncated at total degree ``order``."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        self.indices = tuple(a for o in range(order + 1) for a in multi_indices(nvars, o))
        self.position = {a: i for i, a in enumerate(self.indices)}
        self.size = len(self.indices)
        ia, ib, ic = [], [], []
        for i, a in enumerate(self.indices):
            for j, b in enumerate(self.indices):
                c = tuple(x + y for x, y in zip(a, b))
                if sum(c) <= order:
                    ia.append(i)
                    ib.append(j)
                    ic.append(self.position[c])
        self._ia = np.array(ia, dtype=np.intp)
        self._ib = np.array(ib, dtype=np.intp)
        self._ic = np.array(ic, dtype=np.intp)
        self.factorials = np.array(
            [math.prod(math.factorial(k) for k in a) for a in self.indices], dtype=float
        )

    def constant(self, value: float) -> np.ndarray:
        s = np.zeros(self.size)
        s[0] = value
        return s

    def variable(self, index: int, value: float) -> np.ndarray:
        s = self.constant(value)
        if self.order >= 1:
            e = [0] * self.nvars
            e[index] = 1
            s[self.position[tuple(e)]] = 1.0
        return s

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.bincount(self._ic, weights=a[self._ia] * b[self._ib], minlength=self.size)

    def compose(self, a: np.ndarray, derivs: Sequence[float]) -> np.ndarray:
        """phi(a) given phi^(n)(a0) for n = 0..order."""
        h = a.copy()
        h[0] = 0.0
        out = self.constant(derivs[0])
        term = self.constant(1.0)
        for n in range(1, self.order + 1):
            term = self.mul(term, h)
            out = out + (derivs[n] / math.factorial(n)) * term
        return out

    def ipow(self, a: np.ndarray, n: int) -> np.ndarray:
        if n < 0:
            a = self.reciprocal(a)
            n = -n
        result = self.constant(1.0)
        base = a
        while n:
            if n & 1:
                result = self.mul(result, base)
            n >>= 1
            if n:
                base = self.mul(base, base)
        return result

    def reciprocal(self, a: np.ndarray) -> np.ndarray:
        a0 = a[0]
        if a0 == 0.0:
            raise EvaluationError("division by zero")
        d = [(-1) ** n * math.factorial(n) / a0 ** (n + 1) for n in range(self.order + 1)]
        return self.compose(a, d)

    def apply(self, name: str, a: np.ndarray) -> np.ndarray:
        a0 = a[0]
        N = self.order
        if name == "exp":
            try:
                e = math.exp(a0)
            except OverflowError:
                raise EvaluationError(f"exp({float(a0)!r}) overflows") from None
            d = [e] * (N + 1)
        elif name == "ln":
            if a0 <= 0.0:
                raise EvaluationError(f"ln of non-positive value {float(a0)!r}")
            d = [math.log(a0)] + [(-1) ** (n - 1) * math.factorial(n - 1) / a0 ** n
                                  for n in range(1, N + 1)]
        elif name == "sin":
            cyc = (math.sin(a0), math.cos(a0), -math.sin(a0), -math.cos(a0))
            d = [cyc[n % 4] for n in range(N + 1)]
        elif name == "cos":
            cyc = (math.cos(a0), -math.sin(a0), -math.cos(a0), math.sin(a0))
            d = [cyc[n % 4] for n in range(N + 1)]
        elif name == "sqrt":
            if a0 < 0.0 or (a0 == 0.0 and N > 0):
                raise EvaluationError(f"sqrt is not analytic at {float(a0)!r}")
            d = []
            c = 1.0
            for n in range(N + 1):
                d.append(c * a0 ** (0.5 - n))
                c *= 0.5 - n
        else:
            raise ExpressionError(f"unknown function {name!r}")
        return self.compose(a, d)


@lru_cache(maxsize=None)
def _space(nvars: int, order: int) -> SeriesSpace:
    return SeriesSpace(nvars, order)


def taylor(e: Expr, variables: Sequence[str], point: Mapping[str, float] | Sequence[float],
           order: int, *, memo: dict | None = None) -> np.ndarray:
    """Taylor coefficients of ``e`` at ``point`` in ``variables`` up to total ``order``.

    Entry ``i`` of the result is the coefficient of the monomial
    ``SeriesSpace(len(variables), order).indices[i]``. Variables not listed
    in ``variables`` must be bound by ``point`` (a mapping) and are held fixed.
    ``memo`` may be shared across calls with identical arguments.
    """
    space = _space(len(variables), order)
    if not isinstance(point, Mapping):
        point = dict(zip(variables, point))
    index = {v: i for i, v in enumerate(variables)}
    memo = {} if memo is None else memo

    def go(n: Expr) -> np.ndarray:
        hit = memo.get(n)
        if hit is not None:
            return hit
        if isinstance(n, Const):
            out = space.constant(n.value)
        elif isinstance(n, Var):
            try:
                val = float(point[n.name])
            except KeyError:
                raise EvaluationError(f"unbound variable {n.name!r}") from None
            out = space.variable(index[n.name], val) if n.name in index else space.constant(val)
        elif isinstance(n, Add):
            out = sum((go(t) for t in n.terms[1:]), go(n.terms[0]).copy())
        elif isinstance(n, Mul):
            out = go(n.factors[0])
            for f in n.factors[1:]:
                out = space.mul(out, go(f))
        elif isinstance(n, Neg):
            out = -go(n.arg)
        elif isinstance(n, Pow):
            out = space.ipow(go(n.base), n.exp)
        elif isinstance(n, Func):
            out = space.apply(n.name, go(n.arg))
        else:
            raise ExpressionError(f"unknown node {n!r}")
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"non-finite value while expanding {n}")
        memo[n] = out
        return out

    return go(e)


def derivative_table(e: Expr, variables: Sequence[str], point, order: int,
                     *, memo: dict | None = None) -> dict[tuple[int, ...], float]:
    """Map multi-index -> partial derivative value of ``e`` at ``point``."""
    space = _space(len(variables), order)
    coeffs = taylor(e, variables, point, order, memo=memo)
    vals = coeffs * space.factorials
    return dict(zip(space.indices, vals.tolist()))
