"""Independent reference computations used by the tests.

Exact rational row reduction over :class:`fractions.Fraction`; no numpy in
the arithmetic, so nothing here shares failure modes with the SVD code.
"""

from __future__ import annotations

from fractions import Fraction

from approxlie.expr import Const
from approxlie.jet import CoefficientMatrixFunction, JetOrdering, prolong_to


def rref(rows: list[list[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form and pivot columns."""
    A = [list(r) for r in rows]
    if not A:
        return [], []
    ncols = len(A[0])
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(A)) if A[i][c] != 0), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        inv = 1 / A[r][c]
        A[r] = [v * inv for v in A[r]]
        for i in range(len(A)):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
        if r == len(A):
            break
    return A[:r], pivots


def rank(rows) -> int:
    return len(rref(rows)[1])


def nullspace(rows: list[list[Fraction]], ncols: int) -> list[list[Fraction]]:
    """Basis vectors (as lists) of the exact nullspace."""
    R, pivots = rref(rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, p in zip(R, pivots):
            v[p] = -row[f]
        basis.append(v)
    return basis


def exact_matrix(M: CoefficientMatrixFunction) -> list[list[Fraction]]:
    """Exact value of a constant-coefficient matrix function."""
    nrows, ncols = M.shape
    A = [[Fraction(0)] * ncols for _ in range(nrows)]
    for (i, j), e in M.entries.items():
        if not isinstance(e, Const):
            raise TypeError("oracle handles constant coefficients only")
        A[i][j] = Fraction(e.value)
    return A


def exact_dimension_table(M0: CoefficientMatrixFunction, kmax: int) -> list[list[int]]:
    """d(k, l) = dim pi^l D^k R by exact elimination."""
    table = []
    for k in range(kmax + 1):
        Mk = prolong_to(M0, k)
        n = Mk.ordering.size
        basis = nullspace(exact_matrix(Mk), n)
        row = []
        for ell in range(k + M0.ordering.Q + 1):
            drop = Mk.ordering.leading_count(ell)
            row.append(rank([v[drop:] for v in basis]) if basis else 0)
        table.append(row)
    return table


def random_constant_system(rng, max_columns: int = 30) -> CoefficientMatrixFunction:
    """Sparse small-integer system in m unknowns and nb variables of order Q."""
    while True:
        m, nb, Q = int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(1, 4))
        ordering = JetOrdering(m, nb, Q)
        if ordering.size <= max_columns:
            break
    n = ordering.size
    nrows = int(rng.integers(1, n + 1))
    entries = {}
    for i in range(nrows):
        cols = rng.choice(n, size=int(rng.integers(1, min(n, 4) + 1)), replace=False)
        for j in cols:
            v = int(rng.integers(1, 3)) * int(rng.choice([-1, 1]))
            entries[(i, int(j))] = Const(float(v))
    names = ("x", "u")[:nb]
    return CoefficientMatrixFunction(ordering, entries, nrows, names)
