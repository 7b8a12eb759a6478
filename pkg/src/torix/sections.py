"""Monomial bases M_L = pi^{-1}(L) ∩ N^rays of global sections."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from math import ceil, floor
from typing import Sequence

from . import lattice
from .fan import Fan
from .picard import ClassVector, PicardData, PicardError, ample_basis

Exponent = tuple[int, ...]


def _fiber_vertices(c0: Sequence[int], B: Sequence[Sequence[int]]) -> list[list[Fraction]]:
    """Vertices of {x in R^n : c0 + B x >= 0}, exactly."""
    m, n = len(B), len(B[0])
    out = []
    for rows in combinations(range(m), n):
        x = lattice.solve_rational([B[r] for r in rows], [-c0[r] for r in rows])
        if x is None:
            continue
        if all(c0[r] + sum(B[r][j] * x[j] for j in range(n)) >= 0 for r in range(m)):
            if x not in out:
                out.append(x)
    return out


def monomial_basis(pd: PicardData, L: Sequence[int]) -> list[Exponent]:
    """All c >= 0 in Z^m with class L, sorted lexicographically."""
    c0 = pd.lift_class(L)
    B = pd.beta_star
    verts = _fiber_vertices(c0, B)
    if not verts:
        return []
    n = pd.n
    lo = [ceil(min(v[j] for v in verts)) for j in range(n)]
    hi = [floor(max(v[j] for v in verts)) for j in range(n)]
    out = []
    for x in product(*(range(a, b + 1) for a, b in zip(lo, hi))):
        c = tuple(c0[r] + sum(B[r][j] * x[j] for j in range(n)) for r in range(pd.m))
        if min(c) >= 0:
            out.append(c)
    return sorted(out)


def vertex_monomials(fan: Fan, monos: Sequence[Exponent]) -> list[int]:
    """Indices of the monomials vanishing on some maximal cone's rays.

    For a nef class these are the vertices of the section polytope, so the
    maximum of |y^D| over M_L is attained on them.
    """
    idx = []
    for cone in fan.max_cones:
        for i, c in enumerate(monos):
            if all(c[r] == 0 for r in cone):
                if i not in idx:
                    idx.append(i)
                break
    return sorted(idx)


@dataclass(frozen=True)
class SectionBasis:
    basis: tuple[ClassVector, ...]
    monomials: tuple[tuple[Exponent, ...], ...]
    vertices: tuple[tuple[int, ...], ...]       # indices into monomials[k]
    to_ample: tuple[tuple[int, ...], ...]       # Pic coords -> ample coords (t x t)

    @property
    def t(self) -> int:
        return len(self.basis)

    @property
    def sizes(self) -> list[int]:
        return [len(M) for M in self.monomials]

    def ample_coords(self, L: Sequence[int]) -> list[int]:
        """Integer coordinates of a Pic class in the ample basis."""
        return lattice.matvec(self.to_ample, L)

    def vertex_exponents(self, k: int) -> list[Exponent]:
        return [self.monomials[k][i] for i in self.vertices[k]]


def build_section_basis(fan: Fan, pd: PicardData, basis: Sequence[ClassVector] | None = None) -> SectionBasis:
    basis = [tuple(L) for L in (basis if basis is not None else ample_basis(pd))]
    monos, verts = [], []
    for L in basis:
        M = monomial_basis(pd, L)
        if not M:
            raise PicardError(f"empty monomial basis for class {L}")
        if len(M) < max(2, pd.n + 1):
            raise PicardError(f"class {L} has only {len(M)} sections")
        for c in M:
            assert min(c) >= 0 and pd.class_of(c) == L
        for r in range(pd.m):
            if all(c[r] > 0 for c in M):
                shifted = [a - b for a, b in zip(L, pd.ray_classes[r])]
                if not monomial_basis(pd, shifted):
                    raise PicardError(f"inconsistent section polytope for {L} at ray {r}")
        monos.append(tuple(M))
        verts.append(tuple(vertex_monomials(fan, M)))
    G = [list(L) for L in basis]                 # rows L_k
    to_ample = lattice.inverse_unimodular(lattice.transpose(G))
    return SectionBasis(basis=tuple(basis), monomials=tuple(monos),
                        vertices=tuple(verts),
                        to_ample=tuple(map(tuple, to_ample)))
