"""Determining equations for Lie point symmetries of a scalar ODE.

For ``u_n = f(x, u, u_1, ..., u_{n-1})`` and a generator
``X = xi(x, u) d/dx + eta(x, u) d/du`` the invariance condition
``X^(n)(u_n - f) = 0`` on solutions is a polynomial in ``u_1 .. u_{n-1}``
whose coefficients are linear in the jets of ``xi`` and ``eta``. Splitting
it monomial by monomial gives the linear homogeneous determining system.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

from .expr import (
    ZERO, EvaluationError, Expr, ExpressionError, NonPolynomialError, add,
    collect_monomials, differentiate, evaluate, mul, neg, power, sub, substitute, var,
)
from .parsing import jet_name, parse

__all__ = [
    "ODESpec", "Term", "DeterminingSystem", "ODEError",
    "unknown_symbol", "total_derivative", "generate_determining_system",
]

UNKNOWNS = ("xi", "eta")
_SYMBOL_RE = re.compile(r"^(xi|eta)_(\d+)_(\d+)$")


class ODEError(ExpressionError):
    """The ODE is outside the supported input class."""


def unknown_symbol(a: int, alpha: tuple[int, int]) -> str:
    """Name of the jet symbol for d^alpha of unknown ``a`` (0 = xi, 1 = eta)."""
    return f"{UNKNOWNS[a]}_{alpha[0]}_{alpha[1]}"


def _parse_symbol(name: str):
    m = _SYMBOL_RE.match(name)
    if m is None:
        return None
    return UNKNOWNS.index(m.group(1)), (int(m.group(2)), int(m.group(3)))


@dataclass(frozen=True)
class ODESpec:
    """Scalar ODE ``E(x, u, u_1, .., u_n) = 0`` solved as ``u_n = f``."""

    order: int
    lhs: Expr
    rhs: Expr
    leading: Expr
    x: str = "x"
    u: str = "u"
    text: str = ""

    @classmethod
    def from_text(cls, text: str, x: str = "x", u: str = "u") -> "ODESpec":
        e = parse(text, (x, u), dependent=u, independent=x)
        return cls.from_expr(e, x=x, u=u, text=text)

    @classmethod
    def from_expr(cls, e: Expr, x: str = "x", u: str = "u", text: str = "") -> "ODESpec":
        orders = [0]
        for name in e.free_vars:
            if name.startswith(u) and name[len(u):].isdigit():
                orders.append(int(name[len(u):]))
        n = max(orders)
        if n < 2:
            raise ODEError("only ODEs of order >= 2 are supported "
                           "(first-order ODEs have infinite-dimensional point symmetry algebras)")
        un = jet_name(u, n)
        try:
            parts = collect_monomials(e, [un])
        except NonPolynomialError as exc:
            raise ODEError(f"the ODE must be linear in {un}: {exc}") from None
        if any(m[0] > 1 for m in parts):
            raise ODEError(f"the ODE must be linear in {un}")
        leading = parts.get((1,), ZERO)
        rest = parts.get((0,), ZERO)
        f = neg(mul(rest, power(leading, -1)))
        lower = [jet_name(u, k) for k in range(1, n)]
        try:
            collect_monomials(f, lower)
        except NonPolynomialError as exc:
            raise ODEError(f"the solved form must be polynomial in {', '.join(lower)}: {exc}") from None
        return cls(order=n, lhs=e, rhs=f, leading=leading, x=x, u=u, text=text)

    def check_point(self, x0: float, u0: float) -> None:
        """Raise :class:`ODEError` if the solved form is undefined at (x0, u0)."""
        if self.leading.free_vars - {self.x, self.u}:
            return  # depends on derivatives; cannot be decided from a base point
        try:
            c = evaluate(self.leading, {self.x: x0, self.u: u0})
        except EvaluationError as exc:
            raise ODEError(f"leading coefficient undefined at ({x0}, {u0}): {exc}") from None
        if c == 0.0:
            raise ODEError(f"leading coefficient vanishes at ({x0}, {u0})")


@dataclass(frozen=True)
class Term:
    coeff: Expr
    unknown: int
    alpha: tuple[int, int]


@dataclass(frozen=True)
class DeterminingSystem:
    """Linear homogeneous PDE system for (xi, eta) in the base variables."""

    equations: tuple[tuple[Term, ...], ...]
    order: int
    base_vars: tuple[str, ...] = ("x", "u")
    unknowns: tuple[str, ...] = UNKNOWNS
    monomials: tuple[tuple[int, ...], ...] = field(default=(), compare=False)

    @property
    def num_unknowns(self) -> int:
        return len(self.unknowns)

    @property
    def num_base_vars(self) -> int:
        return len(self.base_vars)


def total_derivative(e: Expr, x: str = "x", u: str = "u") -> Expr:
    """Total x-derivative on the jet space of u, extended to xi/eta jet symbols.

    ``D_x = d/dx + u_1 d/du + sum_k u_{k+1} d/du_k``; a symbol for
    ``d^alpha zeta`` maps to ``zeta_{alpha+e_x} + u_1 zeta_{alpha+e_u}``.
    """
    parts = [differentiate(e, x)]
    for name in sorted(e.free_vars):
        if name == x:
            continue
        if name == u or (name.startswith(u) and name[len(u):].isdigit()):
            k = 0 if name == u else int(name[len(u):])
            d = differentiate(e, name)
            if d != ZERO:
                parts.append(mul(var(jet_name(u, k + 1)), d))
            continue
        sym = _parse_symbol(name)
        if sym is not None:
            a, (i, j) = sym
            d = differentiate(e, name)
            if d != ZERO:
                step = add(var(unknown_symbol(a, (i + 1, j))),
                           mul(var(jet_name(u, 1)), var(unknown_symbol(a, (i, j + 1)))))
                parts.append(mul(step, d))
    return add(*parts)


def _sym(a: int, i: int, j: int) -> Expr:
    return var(unknown_symbol(a, (i, j)))


def generate_determining_system(ode: ODESpec) -> DeterminingSystem:
    n, x, u = ode.order, ode.x, ode.u
    xi, eta = _sym(0, 0, 0), _sym(1, 0, 0)
    dxi = total_derivative(xi, x, u)

    prolonged = [eta]
    for k in range(1, n + 1):
        prev = prolonged[-1]
        prolonged.append(sub(total_derivative(prev, x, u), mul(var(jet_name(u, k)), dxi)))

    f = ode.rhs
    rhs_terms = [mul(xi, differentiate(f, x)), mul(eta, differentiate(f, u))]
    for k in range(1, n):
        rhs_terms.append(mul(prolonged[k], differentiate(f, jet_name(u, k))))
    condition = sub(prolonged[n], add(*rhs_terms))
    condition = substitute(condition, {jet_name(u, n): f})

    lower = [jet_name(u, k) for k in range(1, n)]
    try:
        split = collect_monomials(condition, lower)
    except NonPolynomialError as exc:
        raise ODEError(f"determining condition is not polynomial in derivatives: {exc}") from None

    equations = []
    monomials = []
    order = 0
    for mono in sorted(split, key=lambda m: (sum(m), m)):
        coeff = split[mono]
        syms = sorted(s for s in coeff.free_vars if _parse_symbol(s) is not None)
        linear = collect_monomials(coeff, syms)
        terms = []
        for deg, c in linear.items():
            if sum(deg) == 0:
                raise ODEError("determining condition is not homogeneous")
            if sum(deg) > 1:
                raise ODEError("determining condition is not linear in the infinitesimals")
            a, alpha = _parse_symbol(syms[deg.index(1)])
            terms.append(Term(c, a, alpha))
            order = max(order, sum(alpha))
        if terms:
            terms.sort(key=lambda t: (-sum(t.alpha), t.unknown, tuple(-v for v in t.alpha)))
            equations.append(tuple(terms))
            monomials.append(mono)
    return DeterminingSystem(equations=tuple(equations), order=order,
                             base_vars=(x, u), monomials=tuple(monomials))


def evaluate_equation(eq: tuple[Term, ...], jets: Mapping[tuple[int, tuple[int, int]], float],
                      point: Mapping[str, float]) -> float:
    """Residual of one determining equation for given jet values of (xi, eta)."""
    return sum(evaluate(t.coeff, point) * jets.get((t.unknown, t.alpha), 0.0) for t in eq)
