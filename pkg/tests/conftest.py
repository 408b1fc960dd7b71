import numpy as np
import pytest

from geoflow.curve import ClosedPolygon


def star_polygon(rng, N, jitter=0.3):
    """Random simple polygon: one random angle per sector, random radii."""
    th = 2.0 * np.pi * (np.arange(N) + rng.uniform(0.05, 0.95, N)) / N
    r = 1.0 + jitter * rng.uniform(-1.0, 1.0, N)
    return ClosedPolygon(np.column_stack([r * np.cos(th), r * np.sin(th)]))


def convex_polygon(rng, N, center=(0.0, 0.0), radius=1.0):
    th = np.sort(rng.uniform(0.0, 2.0 * np.pi, N))
    X = radius * np.column_stack([np.cos(th), np.sin(th)]) + np.asarray(center)
    return ClosedPolygon(X)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_square():
    return ClosedPolygon([[0, 0], [0, 1], [1, 1], [1, 0]])


# -- acceptance reporting: one PASS/FAIL line per criterion --------------------
_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when not in ("setup", "call"):
        return
    number, title = mark.args
    entry = _ACCEPTANCE.setdefault(number, {"title": title, "ok": True, "detail": []})
    measured = [ln for ln in rep.capstdout.splitlines() if ln.startswith("measured:")]
    if measured:
        entry["detail"].append(measured[-1][len("measured:") :].strip())
    if rep.failed:
        entry["ok"] = False
        msg = str(rep.longrepr.reprcrash.message) if hasattr(rep.longrepr, "reprcrash") else str(rep.longrepr)
        entry["detail"].append(msg.splitlines()[0][:160])
    elif rep.skipped:
        entry["ok"] = False
        entry["detail"].append("skipped")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[number]
        line = f"{'PASS' if e['ok'] else 'FAIL'} criterion {number}: {e['title']}"
        if e["detail"]:
            line += f"  [{'; '.join(e['detail'])}]"
        terminalreporter.write_line(line)
