"""The exact sequence 0 -> M -> Z^rays -> Pic(X) -> 0 and positivity on Pic(X)."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import lcm
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from . import lattice
from .fan import Fan, RaySet

ClassVector = tuple[int, ...]


class PicardError(ValueError):
    pass


class ProjectivityError(PicardError):
    """No ample integer class was found within the search bound."""


@dataclass(frozen=True)
class PicardData:
    m: int
    n: int
    t: int
    beta_star: tuple[tuple[int, ...], ...]      # m x n, rows are the rays
    proj: tuple[tuple[int, ...], ...]           # t x m
    lift: tuple[tuple[int, ...], ...]           # m x t, proj @ lift == I
    ray_classes: tuple[ClassVector, ...]
    anticanonical: ClassVector
    wall_relations: tuple[tuple[int, ...], ...] = ()
    walls: tuple[tuple[RaySet, RaySet], ...] = ()

    @property
    def provenance(self) -> str:
        return ("rows of proj = Hermite normal form of the left kernel of the ray matrix, "
                "kernel computed by Smith normal form (smallest-pivot, lowest-index rule)")

    def class_of(self, coeffs: Sequence[int]) -> ClassVector:
        if len(coeffs) != self.m:
            raise PicardError(f"expected {self.m} divisor coefficients, got {len(coeffs)}")
        return tuple(lattice.matvec(self.proj, coeffs))

    def lift_class(self, L: Sequence[int]) -> list[int]:
        """A divisor with class L."""
        if len(L) != self.t:
            raise PicardError(f"class must have {self.t} coordinates")
        return lattice.matvec(self.lift, L)

    def pair_walls(self, L: Sequence[int]) -> list[int]:
        c = self.lift_class(L)
        return [sum(a * b for a, b in zip(r, c)) for r in self.wall_relations]

    def is_nef(self, L: Sequence[int]) -> bool:
        return all(v >= 0 for v in self.pair_walls(L))

    def is_ample(self, L: Sequence[int]) -> bool:
        return all(v > 0 for v in self.pair_walls(L))

    def in_image(self, v: Sequence[int]) -> bool:
        """True iff v lies in beta_star(M)."""
        return lattice.solve_integer(self.beta_star, v) is not None


def compute_picard(fan: Fan) -> PicardData:
    """Picard data of a validated fan, including its wall relations."""
    B = [list(r) for r in fan.rays]
    m, n = fan.m, fan.dim
    t = m - n
    if lattice.invariant_factors(B) != [1] * n:
        raise PicardError("cokernel of the ray map has torsion or the rays do not span N")
    K = lattice.left_kernel(B)
    if len(K) != t:
        raise PicardError("unexpected left-kernel rank")
    proj, _ = lattice.hermite_rows(K)
    # right inverse of proj: columns of V from the SNF, U proj V = [I | 0]
    D, U, V = lattice.smith_normal_form(proj)
    if any(D[i][i] != 1 for i in range(t)):
        raise PicardError("projection is not surjective")
    lift = lattice.matmul([row[:t] for row in V], U)
    assert lattice.matmul(proj, lift) == lattice.identity(t)
    assert all(v == 0 for row in lattice.matmul(proj, B) for v in row)
    ray_classes = tuple(tuple(proj[k][r] for k in range(t)) for r in range(m))
    anti = tuple(sum(row) for row in proj)
    rels, walls = _wall_relations(fan)
    return PicardData(m=m, n=n, t=t,
                      beta_star=tuple(map(tuple, B)),
                      proj=tuple(map(tuple, proj)),
                      lift=tuple(map(tuple, lift)),
                      ray_classes=ray_classes,
                      anticanonical=anti,
                      wall_relations=tuple(rels),
                      walls=tuple(walls))


def _wall_relations(fan: Fan):
    owners: dict[RaySet, list[RaySet]] = {}
    for c in fan.max_cones:
        for i in range(len(c)):
            owners.setdefault(c[:i] + c[i + 1:], []).append(c)
    rels, walls = [], []
    for tau, cones in sorted(owners.items()):
        if len(cones) != 2:
            continue
        s1, s2 = cones
        a = next(r for r in s1 if r not in tau)
        b = next(r for r in s2 if r not in tau)
        # coordinates of u_b in the basis of s1
        M = lattice.transpose([fan.rays[r] for r in s1])
        x = lattice.solve_rational(M, fan.rays[b])
        rel = [Fraction(0)] * fan.m
        rel[b] = Fraction(1)
        for r, xr in zip(s1, x):
            rel[r] -= xr
        if rel[a] <= 0:
            raise PicardError(f"rays {a} and {b} lie on the same side of wall {tau}")
        den = lcm(*(v.denominator for v in rel))
        ints = [int(v * den) for v in rel]
        g = lattice.vector_gcd(ints)
        rels.append(tuple(v // g for v in ints))
        walls.append((s1, s2))
    return rels, walls


def wall_relations(fan: Fan, pd: PicardData | None = None) -> list[tuple[int, ...]]:
    if pd is not None and pd.wall_relations:
        return list(pd.wall_relations)
    return _wall_relations(fan)[0]


def _shell(t: int, r: int):
    """Integer vectors of sup-norm exactly r in lexicographic order."""
    for v in product(range(-r, r + 1), repeat=t):
        if max(abs(x) for x in v) == r:
            yield v


def ample_basis(pd: PicardData, bound: int | None = None) -> list[ClassVector]:
    """Greedy Z-basis of Pic(X) made of ample classes.

    Classes are scanned by increasing sup-norm, then lexicographically; a
    class is kept when it is ample and the family stays saturated.
    """
    t = pd.t
    bound = 10 * t if bound is None else bound
    chosen: list[ClassVector] = []
    for r in range(1, bound + 1):
        for v in _shell(t, r):
            if not pd.is_ample(v):
                continue
            cand = chosen + [v]
            if lattice.invariant_factors(cand) == [1] * len(cand):
                chosen = cand
                if len(chosen) == t:
                    return chosen
    raise ProjectivityError(
        f"projectivity not certified: no ample basis with sup-norm <= {bound}")


@dataclass(frozen=True)
class GrowthDirection:
    pairings: tuple[Fraction, ...]        # <[D_rho], u>
    class_dual: tuple[Fraction, ...]      # u evaluated on the Pic basis

    @property
    def anticanonical_pairing(self) -> Fraction:
        return sum(self.pairings, Fraction(0))

    def pair(self, L: Sequence[int]) -> Fraction:
        return sum((Fraction(a) * b for a, b in zip(L, self.class_dual)), Fraction(0))

    def pair_divisor(self, coeffs: Sequence[int]) -> Fraction:
        return sum((Fraction(a) * c for a, c in zip(coeffs, self.pairings)), Fraction(0))


class DirectionError(ValueError):
    pass


def validate_direction(pd: PicardData, pairings: Sequence) -> GrowthDirection:
    """Check that pairings define a functional in the interior of C_eff^dual."""
    if len(pairings) != pd.m:
        raise DirectionError(f"expected {pd.m} pairings, got {len(pairings)}")
    c = tuple(Fraction(x) for x in pairings)
    bad = [i for i, x in enumerate(c) if x <= 0]
    if bad:
        raise DirectionError(f"direction not in the interior of the dual effective cone: "
                             f"<[D_{bad[0]}], u> = {c[bad[0]]} <= 0")
    for j in range(pd.n):
        s = sum(pd.beta_star[r][j] * c[r] for r in range(pd.m))
        if s != 0:
            raise DirectionError(
                f"pairings do not factor through Pic(X): column {j} of the ray matrix pairs to {s}")
    dual = tuple(sum((pd.lift[r][k] * c[r] for r in range(pd.m)), Fraction(0))
                 for k in range(pd.t))
    return GrowthDirection(pairings=c, class_dual=dual)


def direction_from_dual(pd: PicardData, u: Sequence) -> GrowthDirection:
    """Direction given by its values on the Pic basis."""
    u = [Fraction(x) for x in u]
    c = [sum((pd.ray_classes[r][k] * u[k] for k in range(pd.t)), Fraction(0)) for r in range(pd.m)]
    return validate_direction(pd, c)


def central_direction(pd: PicardData) -> GrowthDirection:
    """The direction maximising min_rho <[D_rho], u> subject to <omega^-1, u> = m.

    Rationalised from an LP optimum; for P^n and products of projective
    spaces this gives all pairings equal to 1.
    """
    t, m = pd.t, pd.m
    C = np.array(pd.ray_classes, dtype=float)          # m x t
    # variables (u_1..u_t, s); maximise s
    cost = np.zeros(t + 1)
    cost[-1] = -1.0
    A_ub = np.hstack([-C, np.ones((m, 1))])
    A_eq = np.hstack([C.sum(axis=0)[None, :], np.zeros((1, 1))])
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(m), A_eq=A_eq, b_eq=[float(m)],
                  bounds=[(None, None)] * t + [(None, 10.0)], method="highs")
    if res.status != 0 or res.x[-1] <= 0:
        raise DirectionError("could not find an interior direction")
    for den in (10, 100, 1000, 10**6):
        u = [Fraction(float(x)).limit_denominator(den) for x in res.x[:t]]
        try:
            return direction_from_dual(pd, u)
        except DirectionError:
            continue
    raise DirectionError("could not rationalise an interior direction")
