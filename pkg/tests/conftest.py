import numpy as np
import pytest

from ifsdim.systems import FIXTURES, quadratic_julia


@pytest.fixture(params=sorted(FIXTURES))
def fixture_system(request):
    return FIXTURES[request.param]()


@pytest.fixture(scope="session")
def julia():
    return quadratic_julia(0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(20241017)


_CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """Record one acceptance line; the assertion is left to the test."""

    def record(k: int, ok: bool, detail: str):
        _CRITERIA.setdefault(k, []).append((bool(ok), detail))
        print(f"ACCEPTANCE {k}: {'PASS' if ok else 'FAIL'} | {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        rows = _CRITERIA[k]
        ok = all(r[0] for r in rows)
        detail = "; ".join(d for _, d in rows)
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} | {detail}")
