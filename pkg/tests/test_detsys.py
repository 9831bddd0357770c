import math

import pytest
import sympy as sp

from approxlie.detsys import (
    ODEError, ODESpec, evaluate_equation, generate_determining_system, total_derivative,
    unknown_symbol,
)
from approxlie.expr import evaluate, var

SX, SU = sp.symbols("x u")


def jets_of(xi, eta, point, order):
    """All partial derivatives of a closed-form generator up to ``order``."""
    out = {}
    sub = {SX: point[0], SU: point[1]}
    for a, comp in enumerate((xi, eta)):
        for o in range(order + 1):
            for i in range(o, -1, -1):
                d = sp.diff(comp, SX, i, SU, o - i) if o else comp
                out[(a, (i, o - i))] = float(d.subs(sub))
    return out


def residuals(ode_text, xi, eta, point):
    ode = ODESpec.from_text(ode_text)
    sys = generate_determining_system(ode)
    jets = jets_of(sp.sympify(xi), sp.sympify(eta), point, sys.order)
    b = {"x": point[0], "u": point[1]}
    return [evaluate_equation(eq, jets, b) for eq in sys.equations]


def test_free_particle_equations():
    sys = generate_determining_system(ODESpec.from_text("diff(u,x,2)"))
    assert sys.order == 2
    assert sys.monomials == ((0,), (1,), (2,), (3,))
    got = [sorted((t.unknown, t.alpha, evaluate(t.coeff, {})) for t in eq) for eq in sys.equations]
    # eta_xx ; 2 eta_xu - xi_xx ; eta_uu - 2 xi_xu ; -xi_uu
    assert got == [
        [(1, (2, 0), 1.0)],
        [(0, (2, 0), -1.0), (1, (1, 1), 2.0)],
        [(0, (1, 1), -2.0), (1, (0, 2), 1.0)],
        [(0, (0, 2), -1.0)],
    ]


def test_third_order_equation_keeps_third_derivatives():
    sys = generate_determining_system(ODESpec.from_text("diff(u,x,3)"))
    assert sys.order == 3
    assert len(sys.equations) == 9


SL3 = [("1", "0"), ("0", "1"), ("x", "0"), ("0", "u"), ("u", "0"), ("0", "x"),
       ("x^2", "x*u"), ("x*u", "u^2")]


@pytest.mark.parametrize("xi,eta", SL3)
def test_projective_fields_solve_free_particle(xi, eta):
    r = residuals("diff(u,x,2)", xi, eta, (0.37, -1.2))
    assert max(map(abs, r)) < 1e-12


@pytest.mark.parametrize("xi,eta", [("x^3", "0"), ("0", "u^2"), ("u^2", "0")])
def test_non_symmetries_fail_free_particle(xi, eta):
    assert max(map(abs, residuals("diff(u,x,2)", xi, eta, (0.37, -1.2)))) > 1e-3


@pytest.mark.parametrize("ode,xi,eta", [
    ("diff(u,x,2) - u^3", "1", "0"),
    ("diff(u,x,2) - u^3", "x", "-u"),
    ("diff(u,x,2) + u*diff(u,x)", "1", "0"),
    ("diff(u,x,2) + u*diff(u,x)", "x", "-u"),
    ("diff(u,x,2) - exp(u)", "x", "-2"),
    ("x*diff(u,x,2) + 2*diff(u,x) + x*u", "0", "u"),
    ("diff(u,x,3)", "x^2", "2*x*u"),
])
def test_known_symmetries_satisfy_system(ode, xi, eta):
    r = residuals(ode, xi, eta, (0.8, 0.45))
    assert max(map(abs, r)) < 1e-10


def test_scaling_is_not_a_symmetry_of_bumped_equation():
    r = residuals("diff(u,x,2) + u^3 + exp(-(x-1)^2)", "x", "-u", (0.8, 0.45))
    assert max(map(abs, r)) > 1e-3


def test_determining_system_matches_sympy_invariance_condition():
    """Rebuild the invariance condition of u'' = f with sympy and compare."""
    f_text = "-(0.5*u*diff(u,x) + u^3)"
    xi, eta = sp.Function("xi")(SX, SU), sp.Function("eta")(SX, SU)
    p = sp.Symbol("p")
    Dx = lambda g: sp.diff(g, SX) + p * sp.diff(g, SU)
    f = -(sp.Rational(1, 2) * SU * p + SU**3)
    eta1 = Dx(eta) - p * Dx(xi)
    # eta2 = D eta1 - u'' D xi, with u'' replaced by f; D also acts on p via u'' = f
    D = lambda g: Dx(g) + f * sp.diff(g, p)
    eta2 = D(eta1) - f * Dx(xi)
    cond = sp.expand(eta2 - (xi * sp.diff(f, SX) + eta * sp.diff(f, SU) + eta1 * sp.diff(f, p)))
    ref = sp.Poly(cond, p).all_coeffs()[::-1]

    sys = generate_determining_system(ODESpec.from_text(f"diff(u,x,2) = {f_text}"))
    point = {SX: 0.3, SU: 0.6}
    fx = [sp.sympify(s) for s in ("x^2*u", "sin(x)+u")]
    for trial in fx:
        # test both systems on an arbitrary (non-symmetry) pair of functions
        xiv, etav = trial, sp.sympify("u^3 - x")
        vals_ref = [float(c.subs({xi: xiv, eta: etav}).doit().subs(point)) for c in ref]
        jets = jets_of(xiv, etav, (0.3, 0.6), sys.order)
        vals = [evaluate_equation(eq, jets, {"x": 0.3, "u": 0.6}) for eq in sys.equations]
        by_mono = dict(zip((m[0] for m in sys.monomials), vals))
        for deg, v in enumerate(vals_ref):
            assert math.isclose(by_mono.get(deg, 0.0), v, rel_tol=1e-10, abs_tol=1e-10)


def test_total_derivative_on_jet_symbols():
    e = var(unknown_symbol(1, (0, 0)))
    d = total_derivative(e)
    b = {"eta_1_0": 2.0, "eta_0_1": 3.0, "u1": 5.0}
    assert evaluate(d, b) == 2.0 + 5.0 * 3.0


def test_ode_spec_fields():
    ode = ODESpec.from_text("x*diff(u,x,2) + diff(u,x) = u")
    assert ode.order == 2
    assert evaluate(ode.rhs, {"x": 2.0, "u": 3.0, "u1": 1.0}) == pytest.approx((3.0 - 1.0) / 2.0)


@pytest.mark.parametrize("text", [
    "diff(u,x) + u",                 # first order
    "u + x",                         # no derivative
    "diff(u,x,2)^2 + u",             # not linear in the highest derivative
    "diff(u,x,2) + exp(diff(u,x))",  # not polynomial in u'
    "diff(u,x,2) + 1/diff(u,x)",
])
def test_rejected_odes(text):
    with pytest.raises(ODEError):
        ODESpec.from_text(text)


def test_check_point_leading_coefficient():
    ode = ODESpec.from_text("x*diff(u,x,2) + u")
    ode.check_point(1.0, 0.0)
    with pytest.raises(ODEError):
        ode.check_point(0.0, 1.0)
