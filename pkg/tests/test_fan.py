import json
from itertools import combinations, product

import pytest

from torix.fan import (BUILTIN_FANS, Fan, FanError, all_cones, count_points_mod_p,
                       fan_from_dict, min_collection_size, parse_fan, primitive_collections,
                       validate_fan)

from conftest import ALL_FANS


@pytest.mark.parametrize("name", ALL_FANS)
def test_builtins_valid(name):
    assert validate_fan(BUILTIN_FANS[name]).ok


def test_lone_cone_fails_completeness():
    f = Fan(2, ((1, 0), (0, 1)), ((0, 1),))
    rep = validate_fan(f)
    assert not rep.ok
    assert not rep["complete"].passed
    assert rep["complete"].witness["facet"] in ([0], [1])


def test_non_primitive_ray():
    f = Fan(1, ((2,), (-1,)), ((0,), (1,)))
    rep = validate_fan(f)
    assert not rep["primitive-rays"].passed


def test_singular_cone():
    f = Fan(2, ((1, 0), (1, 2), (-1, -1)), ((0, 1), (1, 2), (0, 2)))
    rep = validate_fan(f)
    assert not rep["simplicial-smooth"].passed
    assert rep["simplicial-smooth"].witness["det"] in (2, -2)


def test_overlapping_cones():
    # the cone (0,2) contains ray 1 in its interior
    f = Fan(2, ((1, 0), (1, 1), (0, 1), (-1, -1)),
            ((0, 1), (1, 2), (0, 2), (2, 3), (0, 3)))
    rep = validate_fan(f)
    assert not rep.ok


def test_parse_errors():
    with pytest.raises(FanError):
        parse_fan("{not json")
    with pytest.raises(FanError):
        fan_from_dict({"dim": 2, "rays": [[1, 0]]})
    with pytest.raises(FanError):
        fan_from_dict({"dim": 2, "rays": [[1, 0, 0]], "max_cones": [[0]]})
    with pytest.raises(FanError):
        fan_from_dict({"dim": 2, "rays": [[1, 0]], "max_cones": [[3]]})


def test_roundtrip():
    f = BUILTIN_FANS["F1"]
    g = parse_fan(json.dumps(f.to_dict()))
    assert g == f and g.digest() == f.digest()


def _bruteforce_pcs(f):
    cones = [set(c) for c in f.max_cones]
    inside = lambda s: any(s <= c for c in cones)
    out = []
    for k in range(1, f.m + 1):
        for C in combinations(range(f.m), k):
            s = set(C)
            if not inside(s) and all(inside(s - {x}) for x in s):
                out.append(C)
    return sorted(out)


@pytest.mark.parametrize("name", ALL_FANS)
def test_primitive_collections(name):
    f = BUILTIN_FANS[name]
    assert primitive_collections(f) == _bruteforce_pcs(f)


def test_primitive_collection_values():
    assert primitive_collections(BUILTIN_FANS["P2"]) == [(0, 1, 2)]
    assert primitive_collections(BUILTIN_FANS["F1"]) == [(0, 2), (1, 3)]
    assert min_collection_size(BUILTIN_FANS["P1"]) == 2


@pytest.mark.parametrize("name", ["P1", "P2", "P1xP1", "F1", "dP7"])
@pytest.mark.parametrize("p", [2, 3, 5])
def test_point_count_via_torsor(name, p):
    # #X(F_p) = #{y in F_p^m, zero support contains no primitive collection} / (p-1)^t
    f = BUILTIN_FANS[name]
    pcs = [set(c) for c in primitive_collections(f)]
    good = 0
    for y in product(range(p), repeat=f.m):
        z = {i for i, v in enumerate(y) if v == 0}
        if not any(c <= z for c in pcs):
            good += 1
    t = f.m - f.dim
    assert good % (p - 1) ** t == 0
    assert count_points_mod_p(f, p) == good // (p - 1) ** t


def test_cone_counts_euler():
    for f in BUILTIN_FANS.values():
        cones = all_cones(f)
        assert len(cones[0]) == 1 and len(cones[1]) == f.m
