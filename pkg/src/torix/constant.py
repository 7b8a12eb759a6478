"""The prediction side: nu(D), the torsor volume, mu_infinity, the Euler product and tau."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .fan import Fan, cone_counts, min_collection_size
from .mobius import density_polynomial
from .picard import PicardData
from .sections import SectionBasis
from .torsor import (DEFAULT_EPS, GrowthSpec, Region, RegionError, box_region,
                     compile_region, real_coordinate_bounds)

CHUNK = 1 << 16
DEFAULT_SAMPLES = 10**6
DEFAULT_SEED = 20240601
DEFAULT_PMAX = 10**5
DEFAULT_EXPONENT_EPS = 0.05
MAX_OVERLAPPING = 4


class DensityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float = 0.0
    method: str = "exact"

    def interval(self, k: float = 3.0) -> tuple[float, float]:
        return self.value - k * self.stderr, self.value + k * self.stderr


def _mc(samples: int, seed: int, draw: Callable[[np.random.Generator, int], np.ndarray]):
    """Mean and standard error of draw() over samples, in fixed-size chunks.

    Chunk i uses Philox(seed) advanced by i jumps, and the partial sums are
    reduced in chunk order, so the result does not depend on scheduling.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    s1 = s2 = 0.0
    base = np.random.Philox(seed)
    done, i = 0, 0
    while done < samples:
        n = min(CHUNK, samples - done)
        rng = np.random.Generator(base.jumped(i))
        v = np.asarray(draw(rng, n), dtype=float)
        s1 += float(v.sum())
        s2 += float((v * v).sum())
        done += n
        i += 1
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0)
    return mean, math.sqrt(var / samples)


# -- nu -------------------------------------------------------------------------

def _interval_integral(w: float, a: float, b: float) -> float:
    """Integral of exp(w x) over [a, b]."""
    if b <= a:
        return 0.0
    if abs(w) < 1e-300:
        return b - a
    return math.exp(w * a) * math.expm1(w * (b - a)) / w


def _parallelotope(polys, w: np.ndarray, t: int):
    """Collapse stacked constraints to t independent two-sided ones, or None."""
    groups: dict[tuple, list] = {}
    for P in polys:
        for j in range(len(P.lo)):
            g = list(P.Gint[j])
            lo, hi = P.lo[j], P.hi[j]
            first = next((x for x in g if x), 0)
            if first == 0:
                if lo > 0 or hi < 0:
                    return "empty"
                continue
            if first < 0:
                g = [-x for x in g]
                lo, hi = -hi, -lo
            key = tuple(g)
            a, b = groups.get(key, (-math.inf, math.inf))
            groups[key] = (max(a, lo), min(b, hi))
    if len(groups) != t:
        return None
    keys = list(groups)
    G = np.array(keys, dtype=float)
    det = round(np.linalg.det(G))
    if det == 0:
        return None
    ivals = [groups[k] for k in keys]
    if any(not (math.isfinite(a) and math.isfinite(b)) for a, b in ivals):
        return None
    return G, det, ivals


def _closed_form(cr, w: np.ndarray) -> float:
    polys = cr.polys
    t = cr.t

    def vol(sub):
        par = _parallelotope(sub, w, t)
        if par == "empty":
            return 0.0
        if par is None:
            raise RegionError("closed form needs every polyhedron to be a box in "
                              "Pic-basis coordinates (t independent two-sided constraints)")
        G, det, ivals = par
        wp = np.linalg.solve(G.T, w)
        out = 1.0
        for wj, (a, b) in zip(wp, ivals):
            out *= _interval_integral(float(wj), a, b)
        return out / abs(det)

    if len(polys) > MAX_OVERLAPPING:
        for P, Q in combinations(polys, 2):
            if vol([P, Q]) > 0:
                raise RegionError(f"more than {MAX_OVERLAPPING} overlapping polyhedra; "
                                  "give disjoint polyhedra")
        return float(sum(vol([P]) for P in polys))
    total = 0.0
    for k in range(1, len(polys) + 1):
        for sub in combinations(polys, k):
            total += (-1) ** (k + 1) * vol(list(sub))
    return float(total)


def anticanonical_weights(pd: PicardData, sb: SectionBasis) -> np.ndarray:
    """Coordinates of omega^-1 in the ample basis."""
    return np.array(sb.ample_coords(pd.anticanonical), dtype=float)


def nu_region(pd: PicardData, sb: SectionBasis, region: Region, method: str = "closed_form",
              samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED,
              weights: Sequence[float] | None = None) -> Estimate:
    """Integral of exp(<omega^-1, a>) over D_1, coordinates a_k = a(L_k).

    The ample basis is a Z-basis of Pic, so Lebesgue measure in these
    coordinates is the one normalised by the dual lattice.
    """
    cr = compile_region(pd, sb, region, None, eps=0.0)
    w = np.asarray(weights, dtype=float) if weights is not None else anticanonical_weights(pd, sb)
    if method == "closed_form":
        return Estimate(_closed_form(cr, w), 0.0, "closed_form")
    if method != "monte_carlo":
        raise ValueError(f"unknown method {method!r}")
    lo, hi = cr.box()
    vol = float(np.prod(hi - lo))
    if vol <= 0:
        return Estimate(0.0, 0.0, "monte_carlo")

    def draw(rng, n):
        a = lo[:, None] + (hi - lo)[:, None] * rng.random((cr.t, n))
        return np.where(cr.contains(a), np.exp(w @ a), 0.0)

    mean, se = _mc(samples, seed, draw)
    return Estimate(vol * mean, vol * se, "monte_carlo")


# -- torsor volume and mu_infinity ------------------------------------------------

def _heights_real(sb: SectionBasis, y: np.ndarray) -> np.ndarray:
    """Heights of real points (columns of y >= 0) from vertex monomials."""
    with np.errstate(divide="ignore"):
        ly = np.log(y)
    H = []
    for k in range(sb.t):
        V = np.array(sb.vertex_exponents(k), dtype=float)
        vals = np.stack([sum(D[r] * ly[r] for r in range(len(D)) if D[r]) for D in V])
        H.append(vals.max(axis=0))
    return np.array(H)


def torsor_region_volume(fan: Fan, pd: PicardData, sb: SectionBasis, region: Region,
                         samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED) -> Estimate:
    """Lebesgue volume of {y in R^m : h(y) in D_1}, hit-or-miss in the bounding box."""
    cr = compile_region(pd, sb, region, None, eps=DEFAULT_EPS)
    b = np.array(real_coordinate_bounds(fan, pd, sb, region, None, DEFAULT_EPS, cr))
    if not np.all(np.isfinite(b)) or np.any(b <= 0):
        raise DensityError("degenerate sampling box")
    box = float(2 ** pd.m * np.prod(b))

    def draw(rng, n):
        y = b[:, None] * rng.random((pd.m, n))
        H = _heights_real(sb, y)
        ok = np.all(np.isfinite(H), axis=0)
        hit = np.zeros(n, dtype=bool)
        hit[ok] = cr.contains(H[:, ok])
        return hit

    p, se = _mc(samples, seed, draw)
    return Estimate(box * p, box * se, "monte_carlo")


def real_density(volume: Estimate, nu: Estimate, t: int) -> Estimate:
    if nu.value <= 0:
        raise DensityError("nu must be positive")
    mu = float(volume.value / (2 ** t * nu.value))
    rel = math.hypot(volume.stderr / volume.value if volume.value else 0.0,
                     nu.stderr / nu.value)
    return Estimate(mu, float(abs(mu) * rel), "volume/nu")


def check_independence(a: Estimate, b: Estimate, k: float = 3.0) -> float:
    """Return the deviation in combined sigmas; raise beyond k."""
    s = math.hypot(a.stderr, b.stderr)
    dev = abs(a.value - b.value) / s if s > 0 else (0.0 if a.value == b.value else math.inf)
    if dev > k:
        raise DensityError(f"mu_infinity depends on the region: {a.value} vs {b.value} "
                           f"({dev:.2f} combined sigma)")
    return dev


# -- Euler product ----------------------------------------------------------------

def primes_upto(n: int) -> np.ndarray:
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(n ** 0.5) + 1):
        if sieve[p]:
            sieve[p * p::p] = False
    return np.nonzero(sieve)[0]


def _prod(xs: list[int]) -> int:
    while len(xs) > 1:
        xs = [xs[i] * xs[i + 1] if i + 1 < len(xs) else xs[i] for i in range(0, len(xs), 2)]
    return xs[0] if xs else 1


def factor_polynomial(fan: Fan) -> list[int]:
    """Integer c_j with (1-1/p)^t #X(F_p)/p^n = sum_j c_j p^-j."""
    n, t = fan.dim, fan.m - fan.dim

    def mul(a, b):
        out = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            for j, y in enumerate(b):
                out[i + j] += x * y
        return out

    def pw(a, e):
        out = [1]
        for _ in range(e):
            out = mul(out, a)
        return out

    one_minus = [1, -1]
    inner = [0]
    for k, N in enumerate(cone_counts(fan)):
        term = mul([0] * k + [N], pw(one_minus, n - k))
        inner = [x + y for x, y in zip(inner + [0] * (len(term) - len(inner)),
                                       term + [0] * (len(inner) - len(term)))]
    c = mul(pw(one_minus, t), inner)
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return c


@dataclass(frozen=True)
class EulerProduct:
    value: float            # finite product over p <= p_max
    lo: float               # enclosure of the infinite product
    hi: float
    tail: float             # S: |log(tail product)| <= S
    p_max: int
    coefficients: tuple

    def to_dict(self) -> dict:
        return asdict(self)


def euler_product(fan: Fan, p_max: int = DEFAULT_PMAX) -> EulerProduct:
    if p_max < 11:
        raise ValueError("p_max must be at least 11")
    n, t = fan.dim, fan.m - fan.dim
    counts = cone_counts(fan)
    ps = [int(p) for p in primes_upto(p_max)]
    nums = [(p - 1) ** t * sum(N * (p - 1) ** (n - k) for k, N in enumerate(counts)) for p in ps]
    num = _prod(nums)
    den = _prod(ps) ** (n + t)
    value = num / den
    c = factor_polynomial(fan)
    if c[0] != 1 or (len(c) > 1 and c[1] != 0):
        raise DensityError(f"unexpected local factor expansion {c}")
    padded = list(c) + [0] * (fan.m + 1 - len(c))
    if padded[: fan.m + 1] != density_polynomial(fan):
        raise DensityError("local factor disagrees with the Möbius density")
    C = sum(abs(x) for x in c[2:])
    P = p_max
    if C >= P * P:
        raise DensityError("p_max too small for the tail bound")
    S = C / ((1 - C / P ** 2) * (P - 1))
    return EulerProduct(value=value, lo=value * math.exp(-S), hi=value * math.exp(S),
                        tail=S, p_max=p_max, coefficients=tuple(c))


# -- prediction -----------------------------------------------------------------

def default_region(pd: PicardData, sb: SectionBasis, width: str = "log(2)") -> Region:
    """Box 0 <= a(L_k) < width on every ample-basis class."""
    return box_region(pd, sb.basis, 0, width)


@dataclass
class DensityReport:
    nu: Estimate
    torsor_volume: Estimate
    real_density: Estimate
    check_density: Estimate
    check_sigma: float
    euler: EulerProduct
    tamagawa: float
    tamagawa_lo: float
    tamagawa_hi: float
    anticanonical_pairing: Fraction
    f: int
    min_pairing: Fraction
    exponent_eps: float
    provenance: dict = field(default_factory=dict)

    @property
    def error_exponent(self) -> float:
        return (1 - 1 / self.f - self.exponent_eps) * float(self.min_pairing)

    def leading(self) -> tuple[float, float, float]:
        """nu * tau and its interval, the coefficient of B^<omega^-1, u>."""
        nlo, nhi = self.nu.interval()
        return (self.nu.value * self.tamagawa, max(nlo, 0.0) * self.tamagawa_lo,
                nhi * self.tamagawa_hi)

    def prediction(self, B) -> tuple[float, float, float]:
        e = float(self.anticanonical_pairing)
        s = float(B) ** e
        c, lo, hi = self.leading()
        val = c * s
        assert math.isclose(val / s, c, rel_tol=1e-15)
        return val, lo * s, hi * s

    def to_dict(self) -> dict:
        return {
            "nu": asdict(self.nu),
            "torsor_volume": asdict(self.torsor_volume),
            "real_density": asdict(self.real_density),
            "real_density_check": {**asdict(self.check_density), "sigma": self.check_sigma},
            "euler_product": self.euler.to_dict(),
            "beta": 1,
            "tamagawa": {"value": self.tamagawa, "lo": self.tamagawa_lo, "hi": self.tamagawa_hi},
            "anticanonical_pairing": str(self.anticanonical_pairing),
            "f": self.f,
            "error_exponent": self.error_exponent,
            "exponent_eps": self.exponent_eps,
            "provenance": self.provenance,
        }


def predict(fan: Fan, pd: PicardData, sb: SectionBasis, region: Region, gs: GrowthSpec,
            samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED, p_max: int = DEFAULT_PMAX,
            exponent_eps: float = DEFAULT_EXPONENT_EPS, check_region: Region | None = None,
            nu_method: str | None = None) -> DensityReport:
    if samples < 1000:
        raise ValueError("at least 10^3 samples are required")
    if nu_method is None:
        try:
            nu = nu_region(pd, sb, region, "closed_form")
        except RegionError:
            nu = nu_region(pd, sb, region, "monte_carlo", samples, seed)
    else:
        nu = nu_region(pd, sb, region, nu_method, samples, seed)
    if nu.value <= 0:
        raise DensityError("region has zero nu-measure")
    vol = torsor_region_volume(fan, pd, sb, region, samples, seed)
    mu = real_density(vol, nu, pd.t)

    other = check_region or default_region(pd, sb, "log(3)")
    try:
        nu2 = nu_region(pd, sb, other, "closed_form")
    except RegionError:
        nu2 = nu_region(pd, sb, other, "monte_carlo", samples, seed + 1)
    vol2 = torsor_region_volume(fan, pd, sb, other, samples, seed + 1)
    mu2 = real_density(vol2, nu2, pd.t)
    dev = check_independence(mu, mu2)

    eu = euler_product(fan, p_max)
    mlo, mhi = mu.interval()
    tau = mu.value * eu.value
    f = min_collection_size(fan)
    return DensityReport(
        nu=nu, torsor_volume=vol, real_density=mu, check_density=mu2, check_sigma=dev,
        euler=eu, tamagawa=tau, tamagawa_lo=max(mlo, 0.0) * eu.lo, tamagawa_hi=mhi * eu.hi,
        anticanonical_pairing=gs.direction.anticanonical_pairing, f=f,
        min_pairing=min(gs.direction.pairings), exponent_eps=exponent_eps,
        provenance={"seed": seed, "samples": samples, "p_max": p_max,
                    "exponent_eps": exponent_eps, "fan": fan.name, "fan_digest": fan.digest(),
                    "ample_basis": [list(L) for L in sb.basis],
                    "direction": [str(c) for c in gs.direction.pairings],
                    "region": region.to_list()})
