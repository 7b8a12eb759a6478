"""Independent brute-force counters used as test oracles."""

from fractions import Fraction
from itertools import product
from math import gcd

import numpy as np


def grid(m, R, positive=False):
    axes = [np.arange(1 if positive else -R, R + 1, dtype=np.int64)] * m
    g = np.meshgrid(*axes, indexing="ij")
    return [a.ravel() for a in g]


def section_maxima(sb, Y):
    """max |y^D| over all of M_k (not just vertices), as int64 arrays."""
    out = []
    for M in sb.monomials:
        best = np.zeros_like(Y[0])
        for D in M:
            v = np.ones_like(Y[0])
            for y, e in zip(Y, D):
                for _ in range(e):
                    v = v * y
            best = np.maximum(best, np.abs(v))
        out.append(best)
    return out


def maxcone_torsor(fan, Y):
    g = np.zeros_like(Y[0])
    for cone in fan.max_cones:
        v = np.ones_like(Y[0])
        for r in range(fan.m):
            if r not in cone:
                v = v * Y[r]
        g = np.gcd(g, v)
    return g == 1


def box_count(fan, sb, R, lo, hi, hi_inclusive=False, scale=None, torsor=True, Y=None):
    """#{y in [-R,R]^m : lo_k * s_k <= W_k < hi_k * s_k}, with rational lo/hi.

    W_k is the section maximum; s_k = scale[k] (an integer, default 1).
    Returns (count, count with all coordinates nonzero).
    """
    Y = grid(fan.m, R) if Y is None else Y
    W = section_maxima(sb, Y)
    ok = maxcone_torsor(fan, Y) if torsor else np.ones(len(Y[0]), bool)
    for k, w in enumerate(W):
        s = 1 if scale is None else scale[k]
        a, b = Fraction(lo[k]) * s, Fraction(hi[k]) * s
        ok &= w * a.denominator >= a.numerator
        ok &= (w * b.denominator <= b.numerator) if hi_inclusive else (w * b.denominator < b.numerator)
    torus = ok & np.all(np.stack(Y) != 0, axis=0)
    return int(ok.sum()), int(torus.sum())


def coprime_count(R, dim):
    """Primitive vectors in [-R,R]^(dim), halved (points of P^(dim-1) with H <= R)."""
    n = 0
    for v in product(range(-R, R + 1), repeat=dim):
        g = 0
        for x in v:
            g = gcd(g, x)
        n += g == 1
    return n // 2
