import sys
from functools import lru_cache

import pytest

from torix import build_section_basis, builtin_fan, compute_picard
from torix.fan import BUILTIN_FANS


@lru_cache(maxsize=None)
def setup(name):
    f = builtin_fan(name)
    pd = compute_picard(f)
    return f, pd, build_section_basis(f, pd)


ALL_FANS = sorted(BUILTIN_FANS)
SURFACES_AND_CURVES = [n for n in ALL_FANS if BUILTIN_FANS[n].dim <= 2]


@pytest.fixture(params=ALL_FANS)
def any_fan(request):
    return setup(request.param)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
