import pytest

from dominotower import hypgeo

# genus-2 settings: R=8 is the largest ball that fits in memory here; delta=2 is
# the thinness estimate, rho=3 the smallest radius with deterministic cone types
SURFACE_R, SURFACE_DELTA, SURFACE_RHO = 8, 2, 3


@pytest.fixture(scope="session")
def free_ball():
    b = hypgeo.ball(hypgeo.free_group(2), 6)
    b.delta = hypgeo.estimate_delta(b) + 1
    return b


@pytest.fixture(scope="session")
def surface():
    b = hypgeo.ball(hypgeo.surface_group(2), SURFACE_R)
    b.delta = SURFACE_DELTA
    atlas = hypgeo.cone_types(b, SURFACE_RHO)
    auto = hypgeo.PairAutomaton(b, atlas, 2 * SURFACE_DELTA)
    graphs = {n: hypgeo.horosphere_graph(b, atlas, n, automaton=auto) for n in range(6)}
    return b, atlas, auto, graphs


CRITERIA = {}


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` records and prints one acceptance line."""

    def record(n, ok, detail=""):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        CRITERIA[n] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
