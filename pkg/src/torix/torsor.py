"""Integral points of the universal torsor: membership, multi-heights and counting.

Counting works on |y|: every y and its sign variants share membership and
height, so we enumerate y >= 0 and weight each point by 2^(#nonzero).
The last few coordinates form a dense block handled with numpy; the rest
are walked depth-first with pruning on completed monomials.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import gcd, log
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from . import lattice
from .fan import Fan, primitive_collections
from .picard import GrowthDirection, PicardData
from .sections import SectionBasis

NEG = -1e30          # stands in for log 0; finite so that 0 * NEG == 0
DEFAULT_EPS = 1e-9
DEFAULT_BUDGET = 10**10
TAIL_LIMIT = 1 << 16


class RegionError(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


class NotATorsorPoint(ValueError):
    pass


# -- regions --------------------------------------------------------------------

@dataclass(frozen=True)
class Bound:
    value: float
    inclusive: bool
    ratio: Fraction | None = None      # value == log(ratio) exactly, if known

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


@dataclass(frozen=True)
class Constraint:
    divisor: tuple[int, ...]
    lo: Bound
    hi: Bound


@dataclass(frozen=True)
class Region:
    polyhedra: tuple[tuple[Constraint, ...], ...]

    def to_list(self) -> list:
        def b(x: Bound):
            if x.ratio is not None:
                return f"log({x.ratio})"
            return x.value if x.finite else None
        return [[{"divisor": list(c.divisor), "min": b(c.lo), "max": b(c.hi),
                  "min_inclusive": c.lo.inclusive, "max_inclusive": c.hi.inclusive}
                 for c in P] for P in self.polyhedra]


_LOG_RE = re.compile(r"^\s*log\(\s*(\d+)\s*(?:/\s*(\d+))?\s*\)\s*$")


def parse_bound(x, inclusive: bool, sign: int) -> Bound:
    if x is None:
        return Bound(sign * math.inf, False)
    if isinstance(x, bool):
        raise RegionError(f"bad bound {x!r}")
    if isinstance(x, (int, float)):
        return Bound(float(x), inclusive, Fraction(1) if x == 0 else None)
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("inf", "+inf", "-inf"):
            return Bound(-math.inf if s.startswith("-") else math.inf, False)
        mt = _LOG_RE.match(s)
        if mt:
            r = Fraction(int(mt.group(1)), int(mt.group(2) or 1))
            if r <= 0:
                raise RegionError(f"log of non-positive number in {x!r}")
            return Bound(math.log(r.numerator) - math.log(r.denominator), inclusive, r)
        try:
            return Bound(float(s), inclusive)
        except ValueError:
            pass
    raise RegionError(f"cannot parse bound {x!r}")


def region_from_list(doc, m: int) -> Region:
    if not isinstance(doc, list) or not doc:
        raise RegionError("region must be a non-empty list of polyhedra")
    polys = []
    for P in doc:
        if isinstance(P, dict):
            P = P.get("constraints")
        if not isinstance(P, list) or not P:
            raise RegionError("each polyhedron must be a non-empty list of constraints")
        cons = []
        for c in P:
            d = c.get("divisor")
            if not isinstance(d, list) or len(d) != m or not all(isinstance(v, int) for v in d):
                raise RegionError(f"constraint divisor must be {m} integers, got {d!r}")
            lo = parse_bound(c.get("min"), bool(c.get("min_inclusive", True)), -1)
            hi = parse_bound(c.get("max"), bool(c.get("max_inclusive", False)), +1)
            cons.append(Constraint(tuple(d), lo, hi))
        polys.append(tuple(cons))
    return Region(tuple(polys))


def parse_region(text: str, m: int) -> Region:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RegionError(f"malformed region document: {exc}") from None
    return region_from_list(doc, m)


def box_region(pd: PicardData, classes: Sequence[Sequence[int]], lo, hi,
               lo_incl: bool = True, hi_incl: bool = False) -> Region:
    """Box alpha_k <= a(L_k) <= beta_k; bounds are floats or 'log(p/q)' strings."""
    cons = []
    for k, L in enumerate(classes):
        a = lo[k] if isinstance(lo, (list, tuple)) else lo
        b = hi[k] if isinstance(hi, (list, tuple)) else hi
        cons.append(Constraint(tuple(pd.lift_class(L)), parse_bound(a, lo_incl, -1),
                               parse_bound(b, hi_incl, 1)))
    return Region((tuple(cons),))


@dataclass(frozen=True)
class GrowthSpec:
    direction: GrowthDirection
    B: float | int | Fraction = 1

    def __post_init__(self):
        if not self.B >= 1:
            raise ValueError(f"B must be >= 1, got {self.B}")

    @property
    def logB(self) -> float:
        B = self.B
        if isinstance(B, Fraction):
            return math.log(B.numerator) - math.log(B.denominator)
        return math.log(B)


@dataclass
class _Poly:
    G: np.ndarray              # q x t, ample coordinates of constraint classes
    Gint: list                 # same, python ints
    lo: np.ndarray
    hi: np.ndarray
    lo_incl: np.ndarray
    hi_incl: np.ndarray
    lo_ratio: list
    hi_ratio: list
    shift: np.ndarray          # log(B) * <u, [D_j]>
    shift_exact: list          # <u, [D_j]> as Fractions


@dataclass
class CompiledRegion:
    """A region expressed in ample-basis coordinates, possibly shifted by log(B) u."""
    polys: list
    t: int
    logB: float
    B: object
    u_ample: np.ndarray        # u(L_k)
    eps: float

    def _lp(self, P: _Poly, c: np.ndarray, sense: int) -> float | None:
        rows, rhs = [], []
        for j in range(len(P.lo)):
            if math.isfinite(P.hi[j]):
                rows.append(P.G[j]); rhs.append(P.hi[j] + self.eps)
            if math.isfinite(P.lo[j]):
                rows.append(-P.G[j]); rhs.append(-(P.lo[j] - self.eps))
        A = np.array(rows) if rows else None
        res = linprog(-sense * c, A_ub=A, b_ub=np.array(rhs) if rows else None,
                      bounds=[(None, None)] * self.t, method="highs")
        if res.status == 2:
            return None                     # empty polyhedron
        if res.status == 3:
            return sense * math.inf
        if res.status != 0:
            raise RegionError(f"LP failure: {res.message}")
        return sense * float(-res.fun) if sense > 0 else float(res.fun)

    def sup(self, c: Sequence[float]) -> float:
        """sup of c.a over the unshifted region (slightly enlarged by eps)."""
        c = np.asarray(c, dtype=float)
        vals = [self._lp(P, c, +1) for P in self.polys]
        vals = [v for v in vals if v is not None]
        return max(vals) if vals else -math.inf

    def inf(self, c: Sequence[float]) -> float:
        c = np.asarray(c, dtype=float)
        vals = [self._lp(P, c, -1) for P in self.polys]
        vals = [v for v in vals if v is not None]
        return min(vals) if vals else math.inf

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        """Bounding box of the unshifted region in ample coordinates."""
        E = np.eye(self.t)
        return (np.array([self.inf(E[k]) for k in range(self.t)]),
                np.array([self.sup(E[k]) for k in range(self.t)]))

    def check_bounded(self):
        lo, hi = self.box()
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise RegionError("region is unbounded in Pic^dual: constraint classes "
                              "of some polyhedron do not positively span Pic(X)_R")

    # membership on arrays of heights (t x N) --------------------------------
    def contains(self, h: np.ndarray, exact_cb=None) -> np.ndarray:
        """Boolean mask; exact_cb(indices) re-decides points in the tolerance band."""
        h = np.asarray(h, dtype=float)
        if h.ndim == 1:
            h = h[:, None]
        out = np.zeros(h.shape[1], dtype=bool)
        band = np.zeros(h.shape[1], dtype=bool)
        eps = self.eps
        for P in self.polys:
            ok = np.ones(h.shape[1], dtype=bool)
            vals = P.G @ h - P.shift[:, None]
            for j in range(len(P.lo)):
                v = vals[j]
                if math.isfinite(P.lo[j]):
                    near = np.abs(v - P.lo[j]) <= eps
                    ok &= np.where(near, P.lo_incl[j], v > P.lo[j])
                    if P.lo_ratio[j] is not None:
                        band |= near
                if math.isfinite(P.hi[j]):
                    near = np.abs(v - P.hi[j]) <= eps
                    ok &= np.where(near, P.hi_incl[j], v < P.hi[j])
                    if P.hi_ratio[j] is not None:
                        band |= near
            out |= ok
        if exact_cb is not None and band.any():
            idx = np.nonzero(band)[0]
            out[idx] = exact_cb(idx)
        return out

    def contains_exact(self, h: Sequence[float], W: Sequence[int]) -> bool:
        """Membership where tolerance-band decisions use exact integer arithmetic.

        W are the integer height maxima, h_k = log W_k.
        """
        eps = self.eps
        h = np.asarray(h, dtype=float)
        for P in self.polys:
            vals = P.G @ h - P.shift
            ok = True
            for j in range(len(P.lo)):
                v = vals[j]
                for side, bnd, incl, ratio in ((-1, P.lo[j], P.lo_incl[j], P.lo_ratio[j]),
                                               (1, P.hi[j], P.hi_incl[j], P.hi_ratio[j])):
                    if not math.isfinite(bnd):
                        continue
                    if abs(v - bnd) <= eps:
                        if ratio is not None and self.B is not None:
                            s = _exact_sign(W, P.Gint[j], P.shift_exact[j], self.B, ratio)
                            good = bool(incl) if s == 0 else (s * -side > 0)
                        else:
                            good = bool(incl)
                    else:
                        good = (v > bnd) if side < 0 else (v < bnd)
                    if not good:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                return True
        return False


def _exact_sign(W, x, c: Fraction, B, r: Fraction) -> int:
    """Sign of sum_k x_k log W_k - c log B - log r, exactly."""
    num, den = 1, 1
    for w, e in zip(W, x):
        if e > 0:
            num *= int(w) ** e
        elif e < 0:
            den *= int(w) ** (-e)
    Q = Fraction(num, den) / r
    a, b = c.numerator, c.denominator
    lhs = Q ** b
    rhs = Fraction(B) ** a
    return (lhs > rhs) - (lhs < rhs)


def compile_region(pd: PicardData, sb: SectionBasis, region: Region,
                   gs: GrowthSpec | None = None, eps: float = DEFAULT_EPS,
                   check: bool = True) -> CompiledRegion:
    t = pd.t
    logB = gs.logB if gs is not None else 0.0
    B = (gs.B if gs is not None else 1)
    B = Fraction(B) if isinstance(B, (int, Fraction)) or (isinstance(B, float) and B.is_integer()) else None
    if gs is not None:
        u_amp = np.array([float(gs.direction.pair(L)) for L in sb.basis])
    else:
        u_amp = np.zeros(t)
    polys = []
    for P in region.polyhedra:
        Gint, lo, hi, li, hic, lr, hr, sh, she = [], [], [], [], [], [], [], [], []
        for c in P:
            if len(c.divisor) != pd.m:
                raise RegionError(f"constraint divisor has length {len(c.divisor)}, expected {pd.m}")
            g = sb.ample_coords(pd.class_of(c.divisor))
            Gint.append(g)
            lo.append(c.lo.value); hi.append(c.hi.value)
            li.append(c.lo.inclusive); hic.append(c.hi.inclusive)
            lr.append(c.lo.ratio); hr.append(c.hi.ratio)
            cu = gs.direction.pair_divisor(c.divisor) if gs is not None else Fraction(0)
            she.append(cu)
            sh.append(logB * float(cu))
        polys.append(_Poly(G=np.array(Gint, dtype=float).reshape(len(P), t), Gint=Gint,
                           lo=np.array(lo), hi=np.array(hi),
                           lo_incl=np.array(li), hi_incl=np.array(hic),
                           lo_ratio=lr, hi_ratio=hr,
                           shift=np.array(sh), shift_exact=she))
    cr = CompiledRegion(polys=polys, t=t, logB=logB, B=B, u_ample=u_amp, eps=eps)
    if check:
        cr.check_bounded()
    return cr


# -- membership -----------------------------------------------------------------

def _check_nonzero(y):
    if all(v == 0 for v in y):
        raise NotATorsorPoint("y = 0")


def is_integral_torsor_point(fan: Fan, y: Sequence[int], pcs=None) -> bool:
    """gcd over each primitive collection equals 1."""
    _check_nonzero(y)
    pcs = primitive_collections(fan) if pcs is None else pcs
    return all(lattice.vector_gcd([y[r] for r in C]) == 1 for C in pcs)


def is_integral_torsor_point_maxcones(fan: Fan, y: Sequence[int]) -> bool:
    """gcd of the complementary monomials y^(rays not in sigma) over maximal cones."""
    _check_nonzero(y)
    g = 0
    for cone in fan.max_cones:
        v = 1
        for r in range(fan.m):
            if r not in cone:
                v *= y[r]
        g = gcd(g, v)
    return g == 1


def monomial_value(y: Sequence[int], D: Sequence[int]) -> int:
    v = 1
    for a, e in zip(y, D):
        if e:
            v *= a ** e
    return v


def is_torsor_point_via_sections(sb: SectionBasis, y: Sequence[int]) -> bool:
    _check_nonzero(y)
    for M in sb.monomials:
        g = 0
        for D in M:
            g = gcd(g, abs(monomial_value(y, D)))
        if g != 1:
            return False
    return True


# -- heights --------------------------------------------------------------------

@dataclass(frozen=True)
class MultiHeight:
    h: tuple[float, ...]
    witness: tuple[tuple[int, object], ...]     # (monomial index in M_k, |y^D|)

    @property
    def values(self):
        return [w[1] for w in self.witness]


def _is_integral(y) -> bool:
    return all(isinstance(v, (int, np.integer)) and not isinstance(v, bool) for v in y)


def multi_height(sb: SectionBasis, y: Sequence) -> MultiHeight:
    """h_k = log max_{D in M_k} |y^D|; exact big integers for integral y."""
    h, wit = [], []
    if _is_integral(y):
        y = [int(v) for v in y]
        for k, M in enumerate(sb.monomials):
            vals = [abs(monomial_value(y, D)) for D in M]
            i = max(range(len(vals)), key=lambda j: (vals[j], -j))
            if vals[i] == 0:
                raise NotATorsorPoint(f"all monomials of L_{k} vanish at y")
            h.append(math.log(vals[i]))
            wit.append((i, vals[i]))
    else:
        with np.errstate(divide="ignore"):
            ly = np.log(np.abs(np.asarray(y, dtype=float)))
        for k, M in enumerate(sb.monomials):
            E = np.array(M, dtype=float)
            with np.errstate(invalid="ignore"):
                vals = np.where(E > 0, E * ly[None, :], 0.0).sum(axis=1)
            i = int(np.argmax(vals))
            if not np.isfinite(vals[i]):
                raise NotATorsorPoint(f"all monomials of L_{k} vanish at y")
            h.append(float(vals[i]))
            wit.append((i, float(np.exp(vals[i]))))
    return MultiHeight(tuple(h), tuple(wit))


def in_region(pd: PicardData, sb: SectionBasis, h, region: Region,
              gs: GrowthSpec | None = None, eps: float = DEFAULT_EPS,
              exact: bool = False) -> bool:
    """Test h - log(B) u in D_1 (shift omitted when gs is None).

    Within eps of a bound the inclusivity flag decides; with exact=True and
    an integral witness, bounds of the form log(p/q) are decided exactly.
    """
    cr = compile_region(pd, sb, region, gs, eps, check=False)
    if isinstance(h, MultiHeight):
        if exact and all(isinstance(w, int) for w in h.values):
            return cr.contains_exact(h.h, h.values)
        hv = h.h
    else:
        hv = h
    hv = np.asarray(hv, dtype=float)
    if not np.all(np.isfinite(hv)):
        raise ValueError("height must be finite")
    return bool(cr.contains(hv)[0])


# -- coordinate bounds ----------------------------------------------------------

@lru_cache(maxsize=64)
def _real_slack(groups: tuple) -> tuple:
    """sup of log|z_rho| over real torus points z of height 0.

    In x = log|z| the height-0 set is the union over choices of one active
    vertex monomial per class of {<D_act, x> = 0, <D, x> <= 0}; one LP per
    choice. The set is compact, so each LP is bounded or infeasible.
    """
    m = len(groups[0][0])
    allrows = np.array([D for g in groups for D in g], dtype=float)
    best = [-math.inf] * m
    for act in product(*groups):
        A_eq = np.array(act, dtype=float)
        for r in range(m):
            c = np.zeros(m)
            c[r] = -1.0
            res = linprog(c, A_ub=allrows, b_ub=np.zeros(len(allrows)), A_eq=A_eq,
                          b_eq=np.zeros(len(act)), bounds=[(None, None)] * m, method="highs")
            if res.status == 0:
                best[r] = max(best[r], float(-res.fun))
            elif res.status == 3:
                best[r] = math.inf
    return tuple(max(0.0, v) for v in best)


def ray_ample_coords(pd: PicardData, sb: SectionBasis) -> list[list[int]]:
    return [sb.ample_coords(c) for c in pd.ray_classes]


def real_coordinate_bounds(fan: Fan, pd: PicardData, sb: SectionBasis, region: Region,
                           gs: GrowthSpec | None = None, eps: float = DEFAULT_EPS,
                           cr: CompiledRegion | None = None) -> list[float]:
    """Bounds on |y_rho| valid for all real torsor points with h in D_B."""
    cr = cr or compile_region(pd, sb, region, gs, eps)
    slack = _real_slack(tuple(tuple(map(tuple, sb.vertex_exponents(k))) for k in range(sb.t)))
    logB = cr.logB
    out = []
    for r, g in enumerate(ray_ample_coords(pd, sb)):
        s = cr.sup(g)
        c = float(gs.direction.pairings[r]) if gs is not None else 0.0
        out.append(math.exp(s + slack[r] + logB * c) * (1 + 1e-12))
    return out


def coordinate_bounds(fan: Fan, pd: PicardData, sb: SectionBasis, region: Region,
                      gs: GrowthSpec | None = None, eps: float = DEFAULT_EPS,
                      cr: CompiledRegion | None = None) -> list[int]:
    """Integer bounds on |y_rho| for integral torsor points with h in D_B.

    Minimum of the ample-class bound exp(s_A) B^<A,u> (a nonzero coordinate
    divides a nonzero monomial of A) and the per-ray real bound. The first
    also holds for integral points with all coordinates nonzero.
    """
    cr = cr or compile_region(pd, sb, region, gs, eps)
    t = pd.t
    cands = [[int(i == k) for i in range(t)] for k in range(t)] + [[1] * t]
    w = sb.ample_coords(pd.anticanonical)
    if pd.is_ample(pd.anticanonical) and min(w) >= 0:
        cands.append(w)
    best = math.inf
    for x in cands:
        s = cr.sup(x)
        e = s + cr.logB * float(np.dot(x, cr.u_ample))
        best = min(best, e)
    a_bound = math.exp(best) * (1 + 1e-12) if math.isfinite(best) else math.inf
    real = real_coordinate_bounds(fan, pd, sb, region, gs, eps, cr)
    out = []
    for b in real:
        v = min(a_bound, b)
        if not math.isfinite(v):
            raise RegionError("region is unbounded")
        out.append(int(math.floor(v * (1 + 1e-9))))
    return out


# -- enumeration engine ---------------------------------------------------------

@dataclass
class CountReport:
    torsor_count: int
    torus_count: int
    t: int
    nodes: int = 0
    box_volume: int = 0
    bounds: list = field(default_factory=list)
    points: list | None = None

    @property
    def boundary_count(self) -> int:
        return self.torsor_count - self.torus_count

    @property
    def rational_count(self) -> int:
        q, r = divmod(self.torsor_count, 2 ** self.t)
        if r:
            raise AssertionError(f"torsor count {self.torsor_count} not divisible by 2^{self.t}")
        return q

    def to_dict(self) -> dict:
        return {"torsor_count": self.torsor_count, "torus_count": self.torus_count,
                "boundary_count": self.boundary_count, "rational_count": self.rational_count,
                "nodes": self.nodes, "box_volume": self.box_volume, "bounds": list(self.bounds)}


class _Engine:
    def __init__(self, fan, pd, sb, cr: CompiledRegion, bounds, *, mult=None,
                 start=0, torsor_check=True, exact=False, collect=False,
                 budget=DEFAULT_BUDGET):
        m = pd.m
        self.m, self.t = m, pd.t
        self.cr = cr
        self.b = [int(x) for x in bounds]
        self.mult = [int(x) for x in mult] if mult is not None else [1] * m
        self.start = start
        self.exact, self.collect, self.budget = exact, collect, budget
        self.torsor_check = torsor_check
        self.pcs = primitive_collections(fan) if torsor_check else []

        rows, kidx = [], []
        for k in range(pd.t):
            for D in sb.vertex_exponents(k):
                rows.append(D)
                kidx.append(k)
        self.V = np.array(rows, dtype=float)
        self.Vint = rows
        self.kidx = np.array(kidx)
        self.groups = [np.nonzero(self.kidx == k)[0] for k in range(pd.t)]

        tol = cr.eps + 1e-9
        E = np.eye(pd.t)
        self.upper = np.array([cr.sup(E[k]) for k in range(pd.t)]) + cr.logB * cr.u_ample + tol
        self.lower = np.array([cr.inf(E[k]) for k in range(pd.t)]) + cr.logB * cr.u_ample - tol

        self.empty = any(b < start for b in self.b)
        self._choose_order()
        self._tables()

    # layout --------------------------------------------------------------
    def _choose_order(self):
        m = self.m
        size = [max(0, b - self.start + 1) for b in self.b]
        tail, G = [], 1
        for r in sorted(range(m), key=lambda r: (-size[r], r)):
            if not tail or G * max(size[r], 1) <= TAIL_LIMIT:
                tail.append(r)
                G *= max(size[r], 1)
        prefix_pool = [r for r in range(m) if r not in tail]
        order = []
        supp = [set(np.nonzero(self.V[i])[0]) for i in range(len(self.V))]
        done = set()
        while prefix_pool:
            def score(r):
                s = done | {r}
                return (sum(1 for sp in supp if sp <= s), -size[r], -r)
            r = max(prefix_pool, key=score)
            order.append(r)
            done.add(r)
            prefix_pool.remove(r)
        self.prefix = order
        self.tail = sorted(tail)

    def _tables(self):
        self.logtab = []
        for r in range(self.m):
            v = np.arange(self.start, self.b[r] + 1, dtype=float) * self.mult[r]
            with np.errstate(divide="ignore"):
                lt = np.where(v > 0, np.log(np.maximum(v, 1)), NEG)
            self.logtab.append(lt)
        # dense tail block
        T = self.tail
        axes = [np.arange(self.start, self.b[r] + 1, dtype=np.int64) for r in T]
        if T and all(len(a) for a in axes):
            grids = np.meshgrid(*axes, indexing="ij")
            self.tvals = [g.ravel() for g in grids]
        else:
            self.tvals = [np.zeros(0, dtype=np.int64) for _ in T]
        G = len(self.tvals[0]) if T else 1
        self.G = G
        tlogs = [self.logtab[r][tv - self.start] for r, tv in zip(T, self.tvals)]
        self.TL = np.zeros((len(self.V), G))
        for j, r in enumerate(T):
            col = self.V[:, r]
            nz = col != 0
            self.TL[nz] += col[nz, None] * tlogs[j][None, :]
        nzt = np.zeros(G, dtype=np.int64)
        allnz = np.ones(G, dtype=bool)
        for tv in self.tvals:
            nzt += tv != 0
            allnz &= tv != 0
        self.tweight = np.left_shift(np.int64(1), nzt)
        self.tallnz = allnz
        # per-collection gcd of the tail coordinates
        self.pc_prefix, self.pc_tail = [], []
        pos = {r: j for j, r in enumerate(T)}
        for C in self.pcs:
            tc = [r for r in C if r in pos]
            g = np.zeros(G, dtype=np.int64)
            for r in tc:
                g = np.gcd(g, self.tvals[pos[r]] * self.mult[r])
            self.pc_prefix.append([r for r in C if r not in pos])
            self.pc_tail.append(g if tc else None)
        # remaining upper log mass per prefix level, for lower pruning
        maxlog = np.array([self.logtab[r][-1] if len(self.logtab[r]) else NEG for r in range(self.m)])
        self.rem = []
        for i in range(len(self.prefix) + 1):
            un = self.prefix[i:] + self.tail
            self.rem.append(sum((self.V[:, r] * maxlog[r] for r in un), np.zeros(len(self.V))))
        # monomials completed once prefix[0..i] is assigned and involving prefix[i]
        self.completed = []
        for i, r in enumerate(self.prefix):
            s = set(self.prefix[: i + 1])
            mask = np.array([(self.V[j, r] > 0) and set(np.nonzero(self.V[j])[0]) <= s
                             for j in range(len(self.V))], dtype=bool)
            self.completed.append(mask)
        # collections fully inside the prefix, checked at the level completing them
        self.pc_close = [[] for _ in self.prefix]
        for ci, C in enumerate(self.pcs):
            if self.pc_tail[ci] is None:
                lvl = max(self.prefix.index(r) for r in C)
                self.pc_close[lvl].append(ci)
        self.pc_level = [[ci for ci, C in enumerate(self.pcs) if r in C] for r in self.prefix]

    # evaluation ------------------------------------------------------------
    def _exact_cb(self, yprefix):
        def cb(idx):
            out = np.zeros(len(idx), dtype=bool)
            for n, i in enumerate(idx):
                y = self._assemble(yprefix, i)
                W = [max(abs(monomial_value(y, self.Vint[j])) for j in grp) for grp in self.groups]
                if min(W) == 0:
                    continue
                out[n] = self.cr.contains_exact([math.log(w) for w in W], W)
            return out
        return cb

    def _assemble(self, yprefix, i):
        y = [0] * self.m
        for r, v in zip(self.prefix, yprefix):
            y[r] = v * self.mult[r]
        for r, tv in zip(self.tail, self.tvals):
            y[r] = int(tv[i]) * self.mult[r]
        return y

    def _leaf(self, P, gpre, nzpre, yprefix, acc):
        acc["nodes"] += self.G
        if acc["nodes"] > self.budget:
            raise BudgetExceeded(f"node budget {self.budget} exceeded")
        if self.G == 0:
            return
        M = P[:, None] + self.TL
        H = np.stack([M[g].max(axis=0) for g in self.groups])
        ok = np.all(H > NEG / 2, axis=0)
        for ci in range(len(self.pcs)):
            gt = self.pc_tail[ci]
            if gt is None:
                continue
            ok &= np.gcd(gt, gpre[ci]) == 1
        if not ok.any():
            return
        idx = np.nonzero(ok)[0]
        cb = self._exact_cb(yprefix) if self.exact else None
        if cb is not None:
            sub = lambda k: cb(idx[k])
        else:
            sub = None
        inside = self.cr.contains(H[:, idx], sub)
        sel = idx[inside]
        if not len(sel):
            return
        w = self.tweight[sel] << nzpre
        acc["torsor"] += int(w.sum())
        if nzpre == len(self.prefix) and all(v != 0 for v in yprefix):
            acc["torus"] += int(w[self.tallnz[sel]].sum())
        if self.collect:
            for i in sel:
                acc["points"].append(self._assemble(yprefix, i))

    def run(self, first_range=None) -> dict:
        acc = {"torsor": 0, "torus": 0, "nodes": 0, "points": [] if self.collect else None}
        if self.empty:
            return acc
        P0 = np.zeros(len(self.V))
        g0 = [0] * len(self.pcs)
        if not self.prefix:
            self._leaf(P0, g0, 0, [], acc)
            return acc
        self._dfs(0, P0, g0, 0, [], acc, first_range)
        return acc

    def _dfs(self, i, P, g, nz, yprefix, acc, first_range):
        r = self.prefix[i]
        lt = self.logtab[r]
        col = self.V[:, r]
        comp = self.completed[i]
        comp_any = comp.any()
        rem = self.rem[i + 1]
        close = self.pc_close[i]
        pcl = self.pc_level[i]
        last = i + 1 == len(self.prefix)
        lo, hi = self.start, self.b[r]
        if first_range is not None and i == 0:
            lo, hi = max(lo, first_range[0]), min(hi, first_range[1])
        mr = self.mult[r]
        for v in range(lo, hi + 1):
            acc["nodes"] += 1
            Pn = P + col * lt[v - self.start]
            if comp_any:
                cv = np.where(comp, Pn, -np.inf)
                if any(cv[grp].max() > self.upper[k] for k, grp in enumerate(self.groups)):
                    break
            U = Pn + rem
            if any(U[grp].max() < self.lower[k] for k, grp in enumerate(self.groups)):
                continue
            gn = list(g)
            for ci in pcl:
                gn[ci] = gcd(gn[ci], v * mr)
            if any(gn[ci] != 1 for ci in close):
                continue
            yp = yprefix + [v]
            nzn = nz + (v != 0)
            if last:
                self._leaf(Pn, gn, nzn, yp, acc)
            else:
                self._dfs(i + 1, Pn, gn, nzn, yp, acc, None)


_WORKER_ENGINE: _Engine | None = None


def _worker(rng):
    return _WORKER_ENGINE.run(rng)


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("TORIX_THREADS", "1")))
    except ValueError:
        return 1


def _run(engine: _Engine, threads: int) -> dict:
    if threads <= 1 or not engine.prefix or engine.empty:
        return engine.run()
    r0 = engine.prefix[0]
    lo, hi = engine.start, engine.b[r0]
    nchunks = min(hi - lo + 1, 4 * threads)
    edges = np.linspace(lo, hi + 1, nchunks + 1).astype(int)
    ranges = [(int(a), int(b) - 1) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    import multiprocessing as mp
    global _WORKER_ENGINE
    _WORKER_ENGINE = engine
    try:
        with mp.get_context("fork").Pool(threads) as pool:
            parts = pool.map(_worker, ranges)
    finally:
        _WORKER_ENGINE = None
    acc = {"torsor": 0, "torus": 0, "nodes": 0, "points": [] if engine.collect else None}
    for p in parts:
        acc["torsor"] += p["torsor"]
        acc["torus"] += p["torus"]
        acc["nodes"] += p["nodes"]
        if engine.collect:
            acc["points"].extend(p["points"])
    return acc


def sign_variants(y: Sequence[int]):
    nz = [i for i, v in enumerate(y) if v]
    for signs in product((1, -1), repeat=len(nz)):
        z = list(y)
        for i, s in zip(nz, signs):
            z[i] = s * z[i]
        yield tuple(z)


def enumerate_points(fan: Fan, pd: PicardData, sb: SectionBasis, region: Region,
                     gs: GrowthSpec | None = None, *, eps: float = DEFAULT_EPS,
                     exact: bool = False, threads: int | None = None,
                     budget: int = DEFAULT_BUDGET, collect: bool = False,
                     bounds: Sequence[int] | None = None) -> CountReport:
    """Exact count of y in T(Z) with h(y) in D_B.

    collect=True also returns every point (all sign variants), for oracles.
    """
    cr = compile_region(pd, sb, region, gs, eps)
    b = list(bounds) if bounds is not None else coordinate_bounds(fan, pd, sb, region, gs, eps, cr)
    eng = _Engine(fan, pd, sb, cr, b, exact=exact, collect=collect, budget=budget)
    acc = _run(eng, threads if threads is not None else default_threads())
    pts = None
    if collect:
        pts = sorted(z for y in acc["points"] for z in sign_variants(y))
    rep = CountReport(torsor_count=acc["torsor"], torus_count=acc["torus"], t=pd.t,
                      nodes=acc["nodes"], box_volume=math.prod(2 * x + 1 for x in b),
                      bounds=b, points=pts)
    rep.rational_count          # divisibility check
    return rep


def count_sublattice(fan: Fan, pd: PicardData, sb: SectionBasis, d: Sequence[int],
                     region: Region, gs: GrowthSpec | None = None, *,
                     eps: float = DEFAULT_EPS, threads: int | None = None,
                     budget: int = DEFAULT_BUDGET, bounds: Sequence[int] | None = None) -> int:
    """N_d(B): y with d_rho | y_rho, all y_rho != 0, h(y) in D_B (no coprimality)."""
    if len(d) != pd.m or any(int(x) < 1 for x in d):
        raise ValueError("d must be m positive integers")
    cr = compile_region(pd, sb, region, gs, eps)
    if bounds is None:
        # integral torus points obey the divisibility bound as well
        bounds = coordinate_bounds(fan, pd, sb, region, gs, eps, cr)
    b = [int(x) // int(di) for x, di in zip(bounds, d)]
    if any(x < 1 for x in b):
        return 0
    eng = _Engine(fan, pd, sb, cr, b, mult=d, start=1, torsor_check=False, budget=budget)
    acc = _run(eng, threads if threads is not None else default_threads())
    return acc["torsor"]


# -- symmetries and embedding ---------------------------------------------------

def unit_orbit(pd: PicardData, y: Sequence[int]) -> set[tuple[int, ...]]:
    """Orbit of y under T_NS(Z) = {±1}^t acting by prod_i s_i^(c_rho)_i."""
    out = set()
    for s in product((1, -1), repeat=pd.t):
        z = []
        for r, v in enumerate(y):
            e = sum(c for c, si in zip(pd.ray_classes[r], s) if si < 0)
            z.append(-v if e % 2 else v)
        out.add(tuple(z))
    return out


def _normalize(v: list[int]) -> tuple[int, ...]:
    g = lattice.vector_gcd(v)
    if g == 0:
        raise NotATorsorPoint("all sections vanish")
    v = [x // g for x in v]
    first = next(x for x in v if x)
    return tuple(-x for x in v) if first < 0 else tuple(v)


def embed(sb: SectionBasis, y: Sequence[int], normalize: bool = True) -> list[tuple[int, ...]]:
    """Projective coordinates (y^D)_{D in M_k} for each k."""
    out = []
    for M in sb.monomials:
        v = [monomial_value(y, D) for D in M]
        if all(x == 0 for x in v):
            raise NotATorsorPoint("all sections vanish")
        out.append(_normalize(v) if normalize else tuple(v))
    return out
