import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sweptsdf.cases import capsule_case, rotating_l_case

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def capsule():
    return capsule_case()


@pytest.fixture(scope="session")
def rotating_l():
    return rotating_l_case()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def point_in_polygon(p, verts) -> bool:
    """Even-odd crossing test, independent of the SDF code."""
    x, y = p
    inside = False
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xc > x:
                inside = not inside
    return inside


def polygon_boundary_distance(p, verts, samples_per_edge=2000) -> float:
    """Distance to a densely sampled polygon boundary."""
    v = np.asarray(verts, dtype=float)
    s = np.linspace(0.0, 1.0, samples_per_edge)[:, None]
    pts = np.concatenate([v[i] + s * (v[(i + 1) % len(v)] - v[i]) for i in range(len(v))])
    return float(np.min(np.linalg.norm(pts - np.asarray(p), axis=1)))


TWO_PI = 2 * math.pi


# acceptance verdicts, echoed once more at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    def record(number: int, name: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
