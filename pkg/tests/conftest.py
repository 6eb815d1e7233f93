import numpy as np
import pytest

from lidarforest.scene import SPECIES, SceneSpec, generate_forest

_acceptance = []


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    outcome = "PASS" if call.excinfo is None else "FAIL"
    _acceptance.append((number, title, outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome in sorted(_acceptance):
        terminalreporter.write_line(f"[{outcome}] criterion {number:>2}: {title}")


@pytest.fixture(scope="session")
def small_forest():
    spec = SceneSpec(seed=3, extent=(20.0, 20.0), tree_count_range=(6, 6),
                     species_mix=((SPECIES["pine"], 1.0), (SPECIES["oak"], 1.0)),
                     terrain_amplitude=0.4, terrain_cell=2.0)
    return generate_forest(spec)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
