import pytest

from anisosmooth import _backend, _fallback

BACKENDS = [pytest.param(_fallback, id="numpy")]
if _backend.compiled is not None:
    BACKENDS.append(pytest.param(_backend.compiled, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    from oracles import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[num])
