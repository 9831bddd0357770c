"""Approximate involutive form of a finite-type linear system at a base point.

Rank decisions use an absolute singular-value cutoff ``tol`` on
row-normalized matrices. The dimension table holds

    d(k, l) = dim pi^l D^k R

where ``D^k R`` is the numerical nullspace of the k-fold prolongation and
``pi^l`` drops the top ``l`` derivative orders; each projected spanning set
is re-orthogonalized by a second SVD with the same cutoff.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .jet import CoefficientMatrixFunction, JetOrdering, PointJets, project_basis

__all__ = [
    "NumericalFailure", "ToleranceConfig", "Decision", "DimensionTable", "InvolutiveForm",
    "numerical_rank", "nullspace_basis", "orthonormal_span", "dimension_table",
    "involutive_completion", "STABLE", "BORDERLINE", "UNSTABLE",
]

log = logging.getLogger(__name__)

STABLE, BORDERLINE, UNSTABLE = "stable", "borderline", "unstable"


class NumericalFailure(RuntimeError):
    """SVD did not converge or produced non-finite output."""


@dataclass(frozen=True)
class ToleranceConfig:
    tol: float
    kmax: int = 8
    rho: float = 10.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.kmax < 1:
            raise ValueError("kmax must be at least 1")
        if not self.rho > 1:
            raise ValueError("borderline factor rho must exceed 1")


def _svd(M: np.ndarray, full: bool):
    if not np.all(np.isfinite(M)):
        raise NumericalFailure("matrix has non-finite entries")
    try:
        return np.linalg.svd(M, full_matrices=full)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD failed: {exc}") from None


def numerical_rank(M: np.ndarray, tol: float) -> tuple[int, np.ndarray]:
    """Number of singular values above ``tol`` and all singular values, descending."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0, np.zeros(0)
    s = _svd(M, full=False)[1]
    return int(np.count_nonzero(s > tol)), s


def nullspace_basis(M: np.ndarray, tol: float, ncols: int | None = None):
    """Orthonormal basis (as columns) of the numerical nullspace of ``M``.

    Returns ``(V0, s)``. Rows of ``M`` may be absent (shape ``(0, n)``), in
    which case ``ncols`` fixes the ambient dimension.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[1] if M.ndim == 2 else ncols
    if M.size == 0:
        return np.eye(n), np.zeros(0)
    _, s, vt = _svd(M, full=True)
    r = int(np.count_nonzero(s > tol))
    return vt[r:].T.copy(), s


def orthonormal_span(S: np.ndarray, tol: float):
    """Orthonormal basis of the numerical column space of ``S``; returns ``(U1, s)``."""
    S = np.asarray(S, dtype=float)
    if S.shape[1] == 0 or S.shape[0] == 0:
        return np.zeros((S.shape[0], 0)), np.zeros(0)
    u, s, _ = _svd(S, full=False)
    r = int(np.count_nonzero(s > tol))
    return u[:, :r].copy(), s


@dataclass
class Decision:
    """One rank decision: the singular values it was based on."""

    label: str
    sigma: np.ndarray
    rank: int

    def margin(self) -> float:
        """Smallest retained singular value (inf when nothing was retained)."""
        return float(self.sigma[self.rank - 1]) if self.rank > 0 else float("inf")


class DimensionTable:
    """Lazily filled table of d(k, l) at one base point."""

    def __init__(self, M0: CoefficientMatrixFunction, z0: Sequence[float], cfg: ToleranceConfig,
                 max_k: int | None = None):
        self.M0 = M0
        self.z0 = tuple(float(v) for v in z0)
        self.cfg = cfg
        self.q = M0.ordering.Q
        self.max_k = cfg.kmax + 1 if max_k is None else max_k
        self.jets = PointJets(M0, self.z0, self.max_k)
        self._null: dict[int, tuple[np.ndarray, Decision]] = {}
        self._proj: dict[tuple[int, int], tuple[np.ndarray, Decision]] = {}

    def ordering(self, k: int) -> JetOrdering:
        return self.jets.ordering(k)

    def nullspace(self, k: int) -> tuple[np.ndarray, Decision]:
        hit = self._null.get(k)
        if hit is None:
            A = self.jets.matrix(k)
            V0, s = nullspace_basis(A, self.cfg.tol, ncols=self.ordering(k).size)
            n = self.ordering(k).size
            hit = (V0, Decision(f"null({k})", s, n - V0.shape[1]))
            self._null[k] = hit
        return hit

    def basis(self, k: int, ell: int) -> tuple[np.ndarray, Decision]:
        """Orthonormal basis of pi^ell D^k R (order q + k - ell coordinates)."""
        hit = self._proj.get((k, ell))
        if hit is None:
            V0, _ = self.nullspace(k)
            if ell == 0:
                # columns of V0 are already orthonormal
                dec = Decision(f"span({k},{ell})", np.ones(V0.shape[1]), V0.shape[1])
                hit = (V0, dec)
            else:
                P = project_basis(V0, self.ordering(k), ell)
                B, s = orthonormal_span(P, self.cfg.tol)
                hit = (B, Decision(f"span({k},{ell})", s, B.shape[1]))
            self._proj[(k, ell)] = hit
        return hit

    def d(self, k: int, ell: int) -> int:
        if not 0 <= ell <= k + self.q:
            raise ValueError(f"projection {ell} outside 0..{k + self.q}")
        return self.basis(k, ell)[0].shape[1]

    def as_rows(self, kmax: int | None = None) -> list[list[int]]:
        kmax = self.cfg.kmax if kmax is None else kmax
        return [[self.d(k, ell) for ell in range(k + self.q + 1)] for k in range(kmax + 1)]


def dimension_table(M0: CoefficientMatrixFunction, z0: Sequence[float],
                    cfg: ToleranceConfig) -> list[list[int]]:
    """Full table ``d[k][l]`` for 0 <= k <= kmax, 0 <= l <= k + q."""
    return DimensionTable(M0, z0, cfg, max_k=cfg.kmax).as_rows()


@dataclass
class InvolutiveForm:
    z0: tuple[float, ...]
    tol: float
    status: str
    q: int
    qprime: int | None = None
    kprime: int | None = None
    ell: int | None = None
    dim: int | None = None
    V: np.ndarray | None = None          # order q' basis, orthonormal columns
    V_next: np.ndarray | None = None     # order q'+1 basis, orthonormal columns
    ordering: JetOrdering | None = None
    ordering_next: JetOrdering | None = None
    table: list[list[int]] = field(default_factory=list)
    decisions: list[Decision] = field(default_factory=list)

    @property
    def min_margin(self) -> float:
        return min((d.margin() for d in self.decisions), default=float("inf"))


def involutive_completion(M0: CoefficientMatrixFunction, z0: Sequence[float],
                          cfg: ToleranceConfig) -> InvolutiveForm:
    """Search for the smallest (k', l) at which the projected system is involutive.

    With ``d = DimensionTable``, the finite-type test at (k', l) requires

    * ``d(k', l) == d(k', l+1)``: no free coordinates at the top order,
    * ``d(k'+1, l+1) == d(k', l)``: one more prolongation adds no constraints,
    * ``d(k'+1, l) == d(k'+1, l+1)``: the order q'+1 data are also determined,

    with ``q' = q + k' - l``. The order q' and q'+1 bases are both taken from
    the nullspace of the (k'+1)-fold prolongation.
    """
    table = DimensionTable(M0, z0, cfg)
    q = table.q
    for k in range(cfg.kmax + 1):
        for ell in range(k + q):
            r = table.d(k, ell)
            if (table.d(k, ell + 1) != r or table.d(k + 1, ell + 1) != r
                    or table.d(k + 1, ell) != r):
                continue
            decisions = [table.nullspace(k)[1], table.nullspace(k + 1)[1],
                         table.basis(k, ell)[1], table.basis(k, ell + 1)[1],
                         table.basis(k + 1, ell)[1], table.basis(k + 1, ell + 1)[1]]
            V, _ = table.basis(k + 1, ell + 1)
            V_next, _ = table.basis(k + 1, ell)
            form = InvolutiveForm(
                z0=table.z0, tol=cfg.tol, status=STABLE, q=q, qprime=q + k - ell,
                kprime=k, ell=ell, dim=r, V=V, V_next=V_next,
                ordering=table.ordering(k + 1).lower(ell + 1),
                ordering_next=table.ordering(k + 1).lower(ell),
                table=[[table.d(kk, ll) for ll in range(kk + q + 1)] for kk in range(k + 2)],
                decisions=decisions,
            )
            if form.min_margin < cfg.rho * cfg.tol:
                form.status = BORDERLINE
            log.debug("involutive at k'=%d l=%d q'=%d dim=%d (%s)", k, ell, form.qprime, r,
                      form.status)
            return form
    return InvolutiveForm(
        z0=table.z0, tol=cfg.tol, status=UNSTABLE, q=q,
        table=[[table.d(kk, ll) for ll in range(kk + q + 1)] for kk in range(cfg.kmax + 1)],
    )
