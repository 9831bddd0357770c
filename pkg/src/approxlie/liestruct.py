"""Structure constants of the approximate symmetry algebra and their reliability."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .giforms import BORDERLINE, STABLE, InvolutiveForm
from .jet import JetOrdering, _binom, _sub_indices, project_basis

__all__ = [
    "ExtensionError", "VectorFieldJet", "StructureTensor", "ReliabilityReport",
    "extend_basis", "commutator_jet", "structure_constants", "jacobi_residuals",
]

EPS = np.finfo(float).eps


class ExtensionError(ValueError):
    """Basis extension to the next order is not unique or not consistent."""


@dataclass(frozen=True)
class VectorFieldJet:
    """Values of d^alpha xi, d^alpha eta (|alpha| <= order) at a base point."""

    z0: tuple[float, ...]
    order: int
    values: np.ndarray

    def __post_init__(self):
        n = 2 * math.comb(self.order + 2, 2)
        if self.values.shape != (n,):
            raise ValueError(f"order {self.order} jet needs {n} coordinates, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("jet entries must be finite")

    @property
    def ordering(self) -> JetOrdering:
        return JetOrdering(2, 2, self.order)

    @classmethod
    def from_derivatives(cls, z0, order: int, derivs) -> "VectorFieldJet":
        """Build from ``derivs[a][(i, j)]`` = d^i_x d^j_u of component ``a``."""
        ordering = JetOrdering(2, 2, order)
        vals = np.array([derivs[a].get(alpha, 0.0) for a, alpha in ordering.columns], float)
        return cls(tuple(z0), order, vals)

    def component(self, a: int) -> dict[tuple[int, int], float]:
        return {alpha: v for (b, alpha), v in zip(self.ordering.columns, self.values) if b == a}


@dataclass
class StructureTensor:
    """c[i, j, k]: coefficient of L_k in [L_i, L_j]."""

    c: np.ndarray
    z0: tuple[float, ...] | None = None
    qprime: int | None = None
    tol: float | None = None

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    @classmethod
    def from_brackets(cls, n: int, brackets: dict, **meta) -> "StructureTensor":
        """``brackets[(i, j)] = {k: value}`` with 0-based indices, i < j."""
        c = np.zeros((n, n, n))
        for (i, j), comb in brackets.items():
            for k, v in comb.items():
                c[i, j, k] = v
                c[j, i, k] = -v
        return cls(c, **meta)


@dataclass
class ReliabilityReport:
    sigma_lie: np.ndarray           # r x r, nan where degenerate
    degenerate: np.ndarray          # r x r bool
    theta: np.ndarray               # r x r radians
    abs_error: np.ndarray           # r x r, out-of-span norm
    sigma_jacobi: np.ndarray        # r x r x r
    tol: float | None = None

    @property
    def sigma_lie_max(self) -> float:
        vals = self.sigma_lie[~np.isnan(self.sigma_lie)]
        return float(vals.max()) if vals.size else 0.0

    @property
    def theta_max(self) -> float:
        return float(self.theta.max()) if self.theta.size else 0.0

    @property
    def sigma_jacobi_max(self) -> float:
        return float(self.sigma_jacobi.max()) if self.sigma_jacobi.size else 0.0


def extend_basis(form: InvolutiveForm) -> list[VectorFieldJet]:
    """Extend each order-q' basis vector uniquely to an order q'+1 jet."""
    if form.status not in (STABLE, BORDERLINE):
        raise ExtensionError(f"cannot extend the basis of an {form.status} form")
    r = form.dim
    if r == 0:
        return []
    V, W = form.V, form.V_next
    if W.shape[1] != r:
        raise ExtensionError(f"order {form.qprime + 1} space has dimension {W.shape[1]} != {r}")
    P = project_basis(W, form.ordering_next, 1)
    C, *_ = np.linalg.lstsq(P, V, rcond=None)
    resid = np.linalg.norm(P @ C - V, axis=0).max()
    if resid > 10 * form.tol:
        raise ExtensionError(f"extension residual {resid:.3e} exceeds {10 * form.tol:.3e}")
    top = (W @ C)[: form.ordering_next.leading_count(1)]
    full = np.vstack([top, V])
    return [VectorFieldJet(form.z0, form.qprime + 1, full[:, i].copy()) for i in range(r)]


def _arrays(v: VectorFieldJet):
    """Component derivative tables as dense (p+1) x (p+1) arrays, index [i, j]."""
    p = v.order
    out = np.zeros((2, p + 2, p + 2))
    for (a, (i, j)), val in zip(v.ordering.columns, v.values):
        out[a, i, j] = val
    return out


def _leibniz(f: np.ndarray, g: np.ndarray, order: int) -> np.ndarray:
    """Derivatives of f*g up to ``order`` from those of f and g."""
    out = np.zeros_like(f)
    for o in range(order + 1):
        for i in range(o, -1, -1):
            alpha = (i, o - i)
            s = 0.0
            for beta in _sub_indices(alpha):
                s += _binom(alpha, beta) * f[beta] * g[alpha[0] - beta[0], alpha[1] - beta[1]]
            out[alpha] = s
    return out


def commutator_jet(vi: VectorFieldJet, vj: VectorFieldJet) -> VectorFieldJet:
    """Jet of [X_i, X_j] one order below the inputs."""
    if vi.order != vj.order:
        raise ValueError("jets must have the same order")
    if vi.z0 != vj.z0:
        raise ValueError("jets must share the base point")
    p = vi.order
    if p < 1:
        raise ValueError("commutator needs jets of order >= 1")
    A, B = _arrays(vi), _arrays(vj)

    def shift(arr, b):
        out = np.zeros_like(arr)
        if b == 0:
            out[:-1, :] = arr[1:, :]
        else:
            out[:, :-1] = arr[:, 1:]
        return out

    w = np.zeros_like(A)
    for a in range(2):
        for b in range(2):
            w[a] += _leibniz(A[b], shift(B[a], b), p - 1)
            w[a] -= _leibniz(B[b], shift(A[a], b), p - 1)
    ordering = JetOrdering(2, 2, p - 1)
    vals = np.array([w[a][alpha] for a, alpha in ordering.columns])
    return VectorFieldJet(vi.z0, p - 1, vals)


def jacobi_residuals(c: np.ndarray) -> np.ndarray:
    """||sum_m c^m_jk c^l_im + c^m_ki c^l_jm + c^m_ij c^l_km||_l / max(1, ||c||_F)."""
    r = c.shape[0]
    scale = max(1.0, float(np.linalg.norm(c)))
    out = np.zeros((r, r, r))
    for i in range(r):
        for j in range(r):
            for k in range(r):
                jac = c[j, k] @ c[i] + c[k, i] @ c[j] + c[i, j] @ c[k]
                out[i, j, k] = np.linalg.norm(jac) / scale
    return out


def structure_constants(form: InvolutiveForm) -> tuple[StructureTensor, ReliabilityReport]:
    jets = extend_basis(form)
    r = len(jets)
    if r == 0:
        raise ExtensionError("zero-dimensional algebra has no structure constants")
    V = form.V
    c = np.zeros((r, r, r))
    sig = np.zeros((r, r))
    degenerate = np.zeros((r, r), dtype=bool)
    theta = np.zeros((r, r))
    abs_err = np.zeros((r, r))
    for i in range(r):
        for j in range(i + 1, r):
            w = commutator_jet(jets[i], jets[j]).values
            coeff = V.T @ w
            inside = V @ coeff
            num = float(np.linalg.norm(inside - w))
            den = float(np.linalg.norm(inside))
            wn = float(np.linalg.norm(w))
            machine = 1e3 * EPS * max(1.0, np.linalg.norm(jets[i].values) * np.linalg.norm(jets[j].values))
            c[i, j] = coeff
            c[j, i] = -coeff
            abs_err[i, j] = abs_err[j, i] = num
            if wn <= machine:
                s, th, deg = 0.0, 0.0, False
            elif den <= 100 * EPS * wn:
                s, th, deg = np.nan, math.pi / 2, True
            else:
                s = num / den
                th = math.asin(min(1.0, num / wn))
                deg = False
            sig[i, j] = sig[j, i] = s
            theta[i, j] = theta[j, i] = th
            degenerate[i, j] = degenerate[j, i] = deg
    tensor = StructureTensor(c, z0=form.z0, qprime=form.qprime, tol=form.tol)
    report = ReliabilityReport(sig, degenerate, theta, abs_err, jacobi_residuals(c), tol=form.tol)
    return tensor, report
