"""Exact integer and rational linear algebra on small dense matrices.

Matrices are lists of lists of Python ints (or Fractions); nothing here
touches floating point.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Sequence

Matrix = list[list[int]]


def identity(n: int) -> Matrix:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def transpose(A: Sequence[Sequence]) -> list[list]:
    if not A:
        return []
    return [list(col) for col in zip(*A)]


def matmul(A: Sequence[Sequence], B: Sequence[Sequence]) -> list[list]:
    Bt = transpose(B)
    return [[sum(a * b for a, b in zip(row, col)) for col in Bt] for row in A]


def matvec(A: Sequence[Sequence], v: Sequence) -> list:
    return [sum(a * x for a, x in zip(row, v)) for row in A]


def det(A: Sequence[Sequence[int]]) -> int:
    """Determinant of a square integer matrix (Bareiss, fraction free)."""
    n = len(A)
    if n == 0:
        return 1
    M = [list(r) for r in A]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for i in range(k + 1, n):
                if M[i][k] != 0:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]


def smith_normal_form(A: Sequence[Sequence[int]]) -> tuple[Matrix, Matrix, Matrix]:
    """Return (D, U, V) with U @ A @ V == D, U and V unimodular.

    D is diagonal with non-negative entries d_1 | d_2 | ... . Pivot rule:
    at each stage the entry of smallest nonzero absolute value in the
    remaining block is moved to the corner, ties broken by lowest
    (row, column) index. The output is therefore a deterministic function
    of A.
    """
    rows = len(A)
    cols = len(A[0]) if rows else 0
    D = [list(map(int, r)) for r in A]
    U = identity(rows)
    V = identity(cols)

    def swap_rows(i, j):
        D[i], D[j] = D[j], D[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for r in D:
            r[i], r[j] = r[j], r[i]
        for r in V:
            r[i], r[j] = r[j], r[i]

    def add_row(src, dst, q):
        # row_dst -= q * row_src
        if q:
            D[dst] = [a - q * b for a, b in zip(D[dst], D[src])]
            U[dst] = [a - q * b for a, b in zip(U[dst], U[src])]

    def add_col(src, dst, q):
        if q:
            for r in D:
                r[dst] -= q * r[src]
            for r in V:
                r[dst] -= q * r[src]

    for s in range(min(rows, cols)):
        while True:
            best = None
            for i in range(s, rows):
                for j in range(s, cols):
                    if D[i][j] and (best is None or abs(D[i][j]) < abs(D[best[0]][best[1]])):
                        best = (i, j)
            if best is None:
                return D, U, V
            swap_rows(s, best[0])
            swap_cols(s, best[1])
            p = D[s][s]
            dirty = False
            for i in range(s + 1, rows):
                add_row(s, i, D[i][s] // p)
                dirty |= D[i][s] != 0
            for j in range(s + 1, cols):
                add_col(s, j, D[s][j] // p)
                dirty |= D[s][j] != 0
            if dirty:
                continue
            # divisibility: fold any entry not divisible by p into row s
            bad = next(((i, j) for i in range(s + 1, rows) for j in range(s + 1, cols)
                        if D[i][j] % p), None)
            if bad is None:
                break
            add_row(bad[0], s, -1)
        if D[s][s] < 0:
            D[s] = [-a for a in D[s]]
            U[s] = [-a for a in U[s]]
    return D, U, V


def invariant_factors(A: Sequence[Sequence[int]]) -> list[int]:
    D, _, _ = smith_normal_form(A)
    return [D[i][i] for i in range(min(len(D), len(D[0]) if D else 0)) if D[i][i]]


def rank(A: Sequence[Sequence[int]]) -> int:
    return len(invariant_factors(A)) if A and A[0] else 0


def left_kernel(A: Sequence[Sequence[int]]) -> Matrix:
    """Basis (as rows) of the saturated lattice {w : w @ A = 0}."""
    D, U, _ = smith_normal_form(A)
    r = sum(1 for i in range(min(len(D), len(D[0]) if D else 0)) if D[i][i])
    return [list(row) for row in U[r:]]


def hermite_rows(A: Sequence[Sequence[int]]) -> tuple[Matrix, Matrix]:
    """Row-style Hermite normal form of a full-row-rank integer matrix.

    Returns (H, G) with G @ A == H, G unimodular, H in reduced row echelon
    form with positive pivots and entries above each pivot reduced into
    [0, pivot).
    """
    H = [list(map(int, r)) for r in A]
    k = len(H)
    G = identity(k)
    cols = len(H[0]) if k else 0
    r = 0
    pivots = []
    for c in range(cols):
        if r == k:
            break
        while True:
            nz = [i for i in range(r, k) if H[i][c]]
            if not nz:
                break
            i0 = min(nz, key=lambda i: (abs(H[i][c]), i))
            H[r], H[i0] = H[i0], H[r]
            G[r], G[i0] = G[i0], G[r]
            done = True
            for i in range(r + 1, k):
                q = H[i][c] // H[r][c]
                if q:
                    H[i] = [a - q * b for a, b in zip(H[i], H[r])]
                    G[i] = [a - q * b for a, b in zip(G[i], G[r])]
                if H[i][c]:
                    done = False
            if done:
                break
        if H[r][c] == 0:
            continue
        if H[r][c] < 0:
            H[r] = [-a for a in H[r]]
            G[r] = [-a for a in G[r]]
        for i in range(r):
            q = H[i][c] // H[r][c]
            if q:
                H[i] = [a - q * b for a, b in zip(H[i], H[r])]
                G[i] = [a - q * b for a, b in zip(G[i], G[r])]
        pivots.append(c)
        r += 1
    if r < k:
        raise ValueError("hermite_rows expects a matrix of full row rank")
    return H, G


def solve_integer(A: Sequence[Sequence[int]], b: Sequence[int]) -> list[int] | None:
    """Some integer x with A @ x == b, or None when no integer solution exists."""
    rows = len(A)
    cols = len(A[0]) if rows else 0
    D, U, V = smith_normal_form(A)
    Ub = matvec(U, b)
    y = [0] * cols
    for i in range(rows):
        d = D[i][i] if i < cols else 0
        if d == 0:
            if Ub[i] != 0:
                return None
        else:
            if Ub[i] % d:
                return None
            y[i] = Ub[i] // d
    return matvec(V, y)


def inverse_unimodular(A: Sequence[Sequence[int]]) -> Matrix:
    n = len(A)
    D, U, V = smith_normal_form(A)
    if any(D[i][i] != 1 for i in range(n)):
        raise ValueError("matrix is not unimodular")
    # U A V = I  =>  A^{-1} = V U
    return matmul(V, U)


def solve_rational(A: Sequence[Sequence], b: Sequence) -> list[Fraction] | None:
    """Unique solution of a square system over Q, None if singular."""
    n = len(A)
    M = [[Fraction(x) for x in row] + [Fraction(bi)] for row, bi in zip(A, b)]
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            return None
        M[c], M[piv] = M[piv], M[c]
        inv = 1 / M[c][c]
        M[c] = [x * inv for x in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return [M[r][n] for r in range(n)]


def vector_gcd(v: Sequence[int]) -> int:
    g = 0
    for x in v:
        g = gcd(g, int(x))
    return g
