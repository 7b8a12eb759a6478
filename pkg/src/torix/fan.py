"""Fans of smooth complete toric varieties: parsing, validation, combinatorics."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np
from scipy.optimize import linprog

from .lattice import det, vector_gcd

RaySet = tuple[int, ...]


class FanError(ValueError):
    """Malformed fan document or degenerate fan."""


@dataclass(frozen=True)
class Fan:
    dim: int
    rays: tuple[tuple[int, ...], ...]
    max_cones: tuple[RaySet, ...]
    name: str | None = None

    @property
    def m(self) -> int:
        return len(self.rays)

    def to_dict(self) -> dict:
        d = {"dim": self.dim, "rays": [list(r) for r in self.rays],
             "max_cones": [list(c) for c in self.max_cones]}
        if self.name is not None:
            d = {"name": self.name, **d}
        return d

    def digest(self) -> str:
        payload = json.dumps({k: v for k, v in self.to_dict().items() if k != "name"},
                             sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class Check:
    name: str
    passed: bool
    witness: dict | None = None


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"ok": self.ok,
                "checks": [{"name": c.name, "passed": c.passed, "witness": c.witness}
                           for c in self.checks]}


def parse_fan(text: str) -> Fan:
    """Parse a JSON fan document (fields name, dim, rays, max_cones)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FanError(f"malformed fan document: {exc}") from None
    if not isinstance(doc, dict):
        raise FanError("fan document must be an object")
    return fan_from_dict(doc)


def fan_from_dict(doc: dict) -> Fan:
    missing = {"dim", "rays", "max_cones"} - doc.keys()
    if missing:
        raise FanError(f"fan document lacks fields {sorted(missing)}")
    n = doc["dim"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise FanError("dim must be a positive integer")
    rays = []
    for r in doc["rays"]:
        if not isinstance(r, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in r):
            raise FanError(f"ray {r!r} is not a list of integers")
        if len(r) != n:
            raise FanError(f"ray {r} has length {len(r)}, expected dim={n}")
        rays.append(tuple(r))
    cones = []
    for c in doc["max_cones"]:
        if not isinstance(c, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in c):
            raise FanError(f"cone {c!r} is not a list of ray indices")
        for i in c:
            if not 0 <= i < len(rays):
                raise FanError(f"ray index {i} out of range in cone {c}")
        cones.append(tuple(sorted(c)))
    name = doc.get("name")
    return Fan(dim=n, rays=tuple(rays), max_cones=tuple(cones),
               name=str(name) if name is not None else None)


# -- validation ---------------------------------------------------------------

def _facets(cone: RaySet):
    for i in range(len(cone)):
        yield cone[:i] + cone[i + 1:]


def _separating_functional(fan: Fan, s1: RaySet, s2: RaySet) -> list[Fraction] | None:
    """Exact m with m=0 on common rays, m>0 on s1-only rays, m<0 on s2-only rays."""
    common = set(s1) & set(s2)
    only1 = [r for r in s1 if r not in common]
    only2 = [r for r in s2 if r not in common]
    n = fan.dim
    U = np.array(fan.rays, dtype=float)
    A_eq = U[sorted(common)] if common else None
    b_eq = np.zeros(len(common)) if common else None
    A_ub = np.vstack([-U[only1], U[only2]]) if only1 or only2 else None
    b_ub = -np.ones(len(only1) + len(only2)) if only1 or only2 else None
    res = linprog(np.zeros(n), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=[(None, None)] * n, method="highs")
    if res.status != 0:
        return None
    for den in (10**3, 10**6, 10**9):
        m = [Fraction(float(x)).limit_denominator(den) for x in res.x]
        val = [sum(a * b for a, b in zip(m, fan.rays[r])) for r in range(fan.m)]
        if (all(val[r] == 0 for r in common) and all(val[r] > 0 for r in only1)
                and all(val[r] < 0 for r in only2)):
            return m
    return None


def validate_fan(fan: Fan) -> ValidationReport:
    """Run the structural checks; failures carry a witness instead of raising."""
    n, m = fan.dim, fan.m
    report = ValidationReport()

    bad = None
    for i, r in enumerate(fan.rays):
        if all(x == 0 for x in r):
            bad = {"ray": i, "reason": "zero vector"}
            break
        if vector_gcd(r) != 1:
            bad = {"ray": i, "reason": f"gcd of entries is {vector_gcd(r)}"}
            break
    if bad is None:
        seen = {}
        for i, r in enumerate(fan.rays):
            if r in seen:
                bad = {"rays": [seen[r], i], "reason": "duplicate ray"}
                break
            seen[r] = i
    if bad is None:
        used = set().union(*map(set, fan.max_cones)) if fan.max_cones else set()
        unused = sorted(set(range(m)) - used)
        if unused:
            bad = {"ray": unused[0], "reason": "ray lies in no maximal cone"}
    report.checks.append(Check("primitive-rays", bad is None, bad))

    bad = None
    if not fan.max_cones:
        bad = {"reason": "no maximal cones"}
    for c in fan.max_cones:
        if len(set(c)) != n:
            bad = {"cone": list(c), "reason": f"has {len(set(c))} generators, expected {n}"}
            break
        d = det([fan.rays[i] for i in c])
        if abs(d) != 1:
            bad = {"cone": list(c), "det": d}
            break
    if bad is None and len(set(fan.max_cones)) != len(fan.max_cones):
        bad = {"reason": "repeated maximal cone"}
    smooth = bad is None
    report.checks.append(Check("simplicial-smooth", smooth, bad))

    bad = None
    if smooth:
        for s1, s2 in combinations(fan.max_cones, 2):
            if _separating_functional(fan, s1, s2) is None:
                bad = {"cones": [list(s1), list(s2)],
                       "reason": "intersection is not a common face"}
                break
    else:
        bad = {"reason": "skipped: cones not simplicial and smooth"}
    report.checks.append(Check("fan-condition", bad is None, bad))

    bad = None
    owners: dict[RaySet, list[int]] = {}
    for k, c in enumerate(fan.max_cones):
        for f in _facets(c):
            owners.setdefault(f, []).append(k)
    for f, ks in owners.items():
        if len(ks) != 2:
            bad = {"facet": list(f), "cones": [list(fan.max_cones[k]) for k in ks],
                   "reason": f"facet shared by {len(ks)} maximal cone(s)"}
            break
    if bad is None and fan.max_cones:
        adj = {k: set() for k in range(len(fan.max_cones))}
        for ks in owners.values():
            for a in ks:
                adj[a].update(ks)
        seen, stack = {0}, [0]
        while stack:
            for nb in adj[stack.pop()] - seen:
                seen.add(nb)
                stack.append(nb)
        if len(seen) != len(fan.max_cones):
            bad = {"reason": "maximal-cone adjacency graph is disconnected",
                   "component": sorted(seen)}
    report.checks.append(Check("complete", bad is None, bad))
    return report


def require_valid(fan: Fan) -> Fan:
    rep = validate_fan(fan)
    if not rep.ok:
        failed = [c for c in rep.checks if not c.passed]
        raise FanError(f"fan failed validation: {failed[0].name} {failed[0].witness}")
    return fan


# -- combinatorics --------------------------------------------------------------

def all_cones(fan: Fan) -> list[list[RaySet]]:
    """All cones of the fan as ray sets, grouped by dimension 0..n."""
    faces: set[RaySet] = set()
    for c in fan.max_cones:
        for k in range(len(c) + 1):
            faces.update(combinations(c, k))
    out: list[list[RaySet]] = [[] for _ in range(fan.dim + 1)]
    for f in faces:
        out[len(f)].append(f)
    for level in out:
        level.sort()
    return out


def cone_counts(fan: Fan) -> list[int]:
    return [len(level) for level in all_cones(fan)]


def in_some_cone(fan: Fan, rays: RaySet) -> bool:
    s = set(rays)
    return any(s <= set(c) for c in fan.max_cones)


def primitive_collections(fan: Fan) -> list[RaySet]:
    """Minimal ray subsets that lie in no cone, canonically sorted."""
    cone_sets = [frozenset(c) for c in fan.max_cones]

    def covered(s):
        return any(s <= c for c in cone_sets)

    found: list[frozenset] = []
    for k in range(2, fan.m + 1):
        for C in combinations(range(fan.m), k):
            s = frozenset(C)
            if covered(s) or any(p <= s for p in found):
                continue
            if all(covered(s - {x}) for x in s):
                found.append(s)
    return sorted(tuple(sorted(p)) for p in found)


def min_collection_size(fan: Fan) -> int:
    pcs = primitive_collections(fan)
    if not pcs:
        raise FanError("fan has no primitive collection")
    return min(len(c) for c in pcs)


def count_points_mod_p(fan: Fan, q: int) -> int:
    """#X(F_q) via the torus-orbit decomposition: sum over cones of (q-1)^(n - dim)."""
    q = int(q)
    if q < 2:
        raise ValueError("q must be at least 2")
    return sum(N * (q - 1) ** (fan.dim - k) for k, N in enumerate(cone_counts(fan)))


# -- built-in library ---------------------------------------------------------------

def _cyclic(rays, name):
    m = len(rays)
    return Fan(2, tuple(map(tuple, rays)), tuple(tuple(sorted((i, (i + 1) % m))) for i in range(m)), name)


def _hirzebruch(a: int, name: str) -> Fan:
    return Fan(2, ((1, 0), (0, 1), (-1, a), (0, -1)), ((0, 1), (1, 2), (2, 3), (0, 3)), name)


BUILTIN_FANS: dict[str, Fan] = {
    "P1": Fan(1, ((1,), (-1,)), ((0,), (1,)), "P1"),
    "P2": Fan(2, ((1, 0), (0, 1), (-1, -1)), ((0, 1), (1, 2), (0, 2)), "P2"),
    "P3": Fan(3, ((1, 0, 0), (0, 1, 0), (0, 0, 1), (-1, -1, -1)),
              tuple(combinations(range(4), 3)), "P3"),
    "P1xP1": Fan(2, ((1, 0), (-1, 0), (0, 1), (0, -1)), ((0, 2), (1, 2), (1, 3), (0, 3)), "P1xP1"),
    "F1": _hirzebruch(1, "F1"),
    "F2": _hirzebruch(2, "F2"),
    "dP8": _hirzebruch(1, "dP8"),
    "dP7": _cyclic([(1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1)], "dP7"),
    "dP6": _cyclic([(1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1)], "dP6"),
}


def builtin_fan(name: str) -> Fan:
    try:
        return BUILTIN_FANS[name]
    except KeyError:
        raise FanError(f"unknown built-in fan {name!r}; known: {sorted(BUILTIN_FANS)}") from None
