"""Jet coordinates and coefficient matrices of linear homogeneous systems.

Columns are graded highest order first, so projecting onto lower order jets
is literal removal of the leading coordinates::

    v = (d^Q zeta, ..., d^1 zeta, zeta)

Inside one order block the unknown index is major and multi-indices run in
descending lexicographic order (``xx, xu, uu`` for two base variables).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .detsys import DeterminingSystem
from .expr import ZERO, EvaluationError, Expr, add, differentiate, evaluate
from .series import SeriesSpace, multi_indices, taylor

__all__ = [
    "JetOrdering", "CoefficientMatrixFunction", "assemble_matrix", "prolong",
    "prolong_to", "evaluate_matrix", "normalize_rows", "project_basis", "PointJets",
]


def _binom(alpha, beta) -> int:
    return math.prod(math.comb(a, b) for a, b in zip(alpha, beta))


def _sub_indices(alpha):
    """All beta <= alpha componentwise."""
    if not alpha:
        yield ()
        return
    for b0 in range(alpha[0] + 1):
        for rest in _sub_indices(alpha[1:]):
            yield (b0,) + rest


@dataclass(frozen=True)
class JetOrdering:
    m: int
    nb: int
    Q: int

    def __post_init__(self):
        if self.m < 1 or self.nb < 1 or self.Q < 0:
            raise ValueError("invalid jet ordering")

    @cached_property
    def columns(self) -> tuple[tuple[int, tuple[int, ...]], ...]:
        cols = []
        for o in range(self.Q, -1, -1):
            for a in range(self.m):
                for alpha in multi_indices(self.nb, o):
                    cols.append((a, alpha))
        return tuple(cols)

    @cached_property
    def _lookup(self) -> dict:
        return {c: i for i, c in enumerate(self.columns)}

    @property
    def size(self) -> int:
        return self.m * math.comb(self.nb + self.Q, self.nb)

    def index(self, a: int, alpha: Sequence[int]) -> int:
        return self._lookup[(a, tuple(alpha))]

    def block_size(self, order: int) -> int:
        return self.m * math.comb(self.nb + order - 1, self.nb - 1)

    def lower(self, ell: int) -> "JetOrdering":
        if not 0 <= ell <= self.Q:
            raise ValueError(f"projection order {ell} outside 0..{self.Q}")
        return JetOrdering(self.m, self.nb, self.Q - ell)

    def leading_count(self, ell: int) -> int:
        """Number of coordinates removed by projecting away the top ``ell`` orders."""
        return self.size - self.lower(ell).size


@dataclass(frozen=True)
class CoefficientMatrixFunction:
    """Sparse map (row, column) -> coefficient expression in the base variables."""

    ordering: JetOrdering
    entries: Mapping[tuple[int, int], Expr]
    nrows: int
    base_vars: tuple[str, ...] = ("x", "u")

    def __post_init__(self):
        n = self.ordering.size
        for (i, j) in self.entries:
            if not (0 <= i < self.nrows and 0 <= j < n):
                raise ValueError(f"entry ({i}, {j}) outside a {self.nrows}x{n} matrix")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ordering.size)

    def rows(self) -> list[dict[int, Expr]]:
        out: list[dict[int, Expr]] = [{} for _ in range(self.nrows)]
        for (i, j), c in self.entries.items():
            out[i][j] = c
        return out


def assemble_matrix(sys: DeterminingSystem) -> CoefficientMatrixFunction:
    ordering = JetOrdering(sys.num_unknowns, sys.num_base_vars, sys.order)
    entries: dict[tuple[int, int], Expr] = {}
    for i, eq in enumerate(sys.equations):
        for t in eq:
            key = (i, ordering.index(t.unknown, t.alpha))
            entries[key] = add(entries[key], t.coeff) if key in entries else t.coeff
    entries = {k: v for k, v in entries.items() if v != ZERO}
    return CoefficientMatrixFunction(ordering, entries, len(sys.equations), sys.base_vars)


def _derive_row(row: Mapping[int, Expr], src: JetOrdering, dst: JetOrdering, j: int,
                base_vars: Sequence[str]) -> dict[int, Expr]:
    """Row of D_j applied to an equation (product rule)."""
    out: dict[int, Expr] = {}

    def put(col, c):
        out[col] = add(out[col], c) if col in out else c

    for col, c in row.items():
        a, alpha = src.columns[col]
        up = list(alpha)
        up[j] += 1
        put(dst.index(a, up), c)
        dc = differentiate(c, base_vars[j])
        if dc != ZERO:
            put(dst.index(a, alpha), dc)
    return {k: v for k, v in out.items() if v != ZERO}


def prolong(M: CoefficientMatrixFunction) -> CoefficientMatrixFunction:
    """One symbolic prolongation: every row followed by its nb total derivatives."""
    src = M.ordering
    dst = JetOrdering(src.m, src.nb, src.Q + 1)
    entries: dict[tuple[int, int], Expr] = {}
    r = 0
    for row in M.rows():
        new_rows = [{dst.index(*src.columns[col]): c for col, c in row.items()}]
        for j in range(src.nb):
            new_rows.append(_derive_row(row, src, dst, j, M.base_vars))
        for nr in new_rows:
            for col, c in nr.items():
                entries[(r, col)] = c
            r += 1
    return CoefficientMatrixFunction(dst, entries, r, M.base_vars)


def prolong_to(M: CoefficientMatrixFunction, k: int) -> CoefficientMatrixFunction:
    """Symbolic k-fold prolongation with one row per (equation, d^alpha), |alpha| <= k.

    Unlike iterating :func:`prolong`, repeated mixed derivatives are not
    duplicated. Rows are grouped by |alpha| ascending, then equation.
    """
    base = M.ordering
    dst = JetOrdering(base.m, base.nb, base.Q + k)
    rows = M.rows()
    current = {(i, (0,) * base.nb): {dst.index(*base.columns[c]): e for c, e in row.items()}
               for i, row in enumerate(rows)}
    layers = [current]
    for o in range(1, k + 1):
        nxt = {}
        for alpha in multi_indices(base.nb, o):
            # derive from the first parent that exists: alpha - e_j for smallest j
            j = next(t for t, v in enumerate(alpha) if v > 0)
            parent = list(alpha)
            parent[j] -= 1
            for i in range(len(rows)):
                nxt[(i, alpha)] = _derive_row(layers[-1][(i, tuple(parent))], dst, dst, j,
                                             M.base_vars)
        layers.append(nxt)
    entries = {}
    r = 0
    for o, layer in enumerate(layers):
        for alpha in multi_indices(base.nb, o):
            for i in range(len(rows)):
                for col, c in layer[(i, alpha)].items():
                    entries[(r, col)] = c
                r += 1
    return CoefficientMatrixFunction(dst, entries, r, M.base_vars)


def normalize_rows(A: np.ndarray) -> np.ndarray:
    """Scale rows to unit Euclidean norm and drop exactly-zero rows."""
    norms = np.linalg.norm(A, axis=1)
    keep = norms > 0.0
    return A[keep] / norms[keep, None]


def evaluate_matrix(M: CoefficientMatrixFunction, z0: Sequence[float],
                    normalize: bool = True) -> np.ndarray:
    point = dict(zip(M.base_vars, map(float, z0)))
    A = np.zeros(M.shape)
    for (i, j), c in M.entries.items():
        try:
            A[i, j] = evaluate(c, point)
        except EvaluationError as exc:
            err = EvaluationError(f"row {i}: {exc}")
            err.row = i
            raise err from None
    return normalize_rows(A) if normalize else A


def project_basis(B: np.ndarray, ordering: JetOrdering, ell: int) -> np.ndarray:
    """Drop the top ``ell`` order blocks from column vectors in ``ordering``."""
    B = np.asarray(B, dtype=float)
    drop = ordering.leading_count(ell)
    return B[drop:] if B.ndim == 1 else B[drop:, :]


class PointJets:
    """Numeric k-fold prolongations of a matrix function at one base point.

    Derivatives of every coefficient are taken from truncated Taylor series
    up to ``max_k``; the rows are those of :func:`prolong_to`, so
    ``PointJets(M, z0, k).matrix(k)`` equals
    ``evaluate_matrix(prolong_to(M, k), z0)`` up to rounding.
    """

    def __init__(self, M: CoefficientMatrixFunction, z0: Sequence[float], max_k: int):
        self.M = M
        self.z0 = tuple(float(v) for v in z0)
        self.max_k = max_k
        nb = M.ordering.nb
        self.space = SeriesSpace(nb, max_k)
        memo: dict = {}
        point = dict(zip(M.base_vars, self.z0))
        # per row: list of (a, beta, derivative values indexed like self.space)
        self._rows = []
        for i, row in enumerate(M.rows()):
            items = []
            for col, c in sorted(row.items()):
                a, beta = M.ordering.columns[col]
                try:
                    coeffs = taylor(c, M.base_vars, point, max_k, memo=memo)
                except EvaluationError as exc:
                    err = EvaluationError(f"row {i}: {exc}")
                    err.row = i
                    raise err from None
                items.append((a, beta, coeffs * self.space.factorials))
            self._rows.append(items)
        self._cache: dict[int, np.ndarray] = {}

    def ordering(self, k: int) -> JetOrdering:
        o = self.M.ordering
        return JetOrdering(o.m, o.nb, o.Q + k)

    def raw_matrix(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.max_k:
            raise ValueError(f"prolongation {k} outside 0..{self.max_k}")
        dst = self.ordering(k)
        nb = self.M.ordering.nb
        pos = self.space.position
        alphas = [alpha for o in range(k + 1) for alpha in multi_indices(nb, o)]
        A = np.zeros((len(alphas) * len(self._rows), dst.size))
        r = 0
        for alpha in alphas:
            subs = [(g, _binom(alpha, g)) for g in _sub_indices(alpha)]
            for items in self._rows:
                for a, beta, dvals in items:
                    for g, w in subs:
                        rest = tuple(x - y for x, y in zip(alpha, g))
                        val = dvals[pos[rest]]
                        if val != 0.0:
                            col = dst.index(a, tuple(x + y for x, y in zip(beta, g)))
                            A[r, col] += w * val
                r += 1
        return A

    def matrix(self, k: int) -> np.ndarray:
        """Row-normalized k-fold prolongation (zero rows dropped)."""
        hit = self._cache.get(k)
        if hit is None:
            hit = normalize_rows(self.raw_matrix(k))
            self._cache[k] = hit
        return hit
