"""Möbius function on (N*)^rays attached to the primitive collections of a fan.

The gcd condition factors over primes, so mu(d) is a product of local
values mu_p(A_p), A_p = {rho : p | d_rho}, each obtained by inclusion-
exclusion over families of primitive collections.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Sequence

from .fan import Fan, count_points_mod_p, primitive_collections

MAX_COLLECTIONS = 20


class MobiusError(ArithmeticError):
    pass


@lru_cache(maxsize=32)
def mobius_table(fan: Fan) -> dict[tuple[int, ...], int]:
    """Nonzero local values mu_p(A), keyed by sorted ray tuples."""
    pcs = [frozenset(c) for c in primitive_collections(fan)]
    if len(pcs) > MAX_COLLECTIONS:
        raise MobiusError(f"{len(pcs)} primitive collections exceeds the guard of {MAX_COLLECTIONS}")
    acc: dict[frozenset, int] = {frozenset(): 1}
    for k in range(1, len(pcs) + 1):
        sign = (-1) ** k
        for fam in combinations(pcs, k):
            A = frozenset().union(*fam)
            acc[A] = acc.get(A, 0) + sign
    return {tuple(sorted(A)): v for A, v in sorted(acc.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))
            if v != 0}


def mobius_local(fan: Fan, A: Sequence[int]) -> int:
    return mobius_table(fan).get(tuple(sorted(set(A))), 0)


def _factor(n: int) -> dict[int, int]:
    out, p = {}, 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def mobius_value(fan: Fan, d: Sequence[int]) -> int:
    if len(d) != fan.m or any(int(x) < 1 for x in d):
        raise ValueError("d must be a vector of m positive integers")
    supp: dict[int, list[int]] = {}
    for r, x in enumerate(d):
        for p, e in _factor(int(x)).items():
            if e > 1:
                return 0
            supp.setdefault(p, []).append(r)
    val = 1
    for p in sorted(supp):
        val *= mobius_local(fan, supp[p])
        if val == 0:
            return 0
    return val


def density_polynomial(fan: Fan) -> list[int]:
    """Coefficients c_j of sum_A mu(A) x^|A|."""
    c = [0] * (fan.m + 1)
    for A, v in mobius_table(fan).items():
        c[len(A)] += v
    return c


def local_density(fan: Fan, p: int) -> Fraction:
    """sum_A mu_p(A) p^-|A|, checked against (1 - 1/p)^t #X(F_p) / p^n."""
    lhs = sum((Fraction(v, p ** len(A)) for A, v in mobius_table(fan).items()), Fraction(0))
    t = fan.m - fan.dim
    rhs = (1 - Fraction(1, p)) ** t * Fraction(count_points_mod_p(fan, p), p ** fan.dim)
    if lhs != rhs:
        raise MobiusError(f"local density mismatch at p={p}: {lhs} != {rhs}")
    return lhs


def format_density(fan: Fan) -> str:
    """The local density as a polynomial in 1/p."""
    terms = []
    for j, c in enumerate(density_polynomial(fan)):
        if c == 0:
            continue
        if j == 0:
            terms.append(str(c))
            continue
        num = abs(c)
        den = "p" if j == 1 else f"p^{j}"
        terms.append(("- " if c < 0 else "+ ") + f"{num}/{den}")
    return " ".join(terms)


def _primes(n: int) -> list[int]:
    return [p for p in range(2, n + 1) if all(p % q for q in range(2, int(p ** 0.5) + 1))]


def mobius_support(fan: Fan, bounds: Sequence[int]):
    """All (d, mu(d)) with mu(d) != 0 and d_rho <= bounds[rho]."""
    table = [(A, v) for A, v in mobius_table(fan).items() if A]
    ps = _primes(max(bounds))
    out = []

    def rec(i, d, val):
        if i == len(ps):
            out.append((tuple(d), val))
            return
        p = ps[i]
        rec(i + 1, d, val)
        for A, v in table:
            if all(d[r] * p <= bounds[r] for r in A):
                e = list(d)
                for r in A:
                    e[r] *= p
                rec(i + 1, e, val * v)

    rec(0, [1] * fan.m, 1)
    return sorted(out)
