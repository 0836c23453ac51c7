import numpy as np
import pytest
from hypothesis import settings

from valuedyn.core import EgoNetwork

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")


def make_net(ego, alters, ego_id="e0"):
    """Single-segment network from an ego score and a list of alter scores (same on all dimensions)."""
    rows = [[[ego] * 5]] + [[[a] * 5] for a in alters]
    return EgoNetwork(ego_id, tuple(f"{ego_id}.a{k}" for k in range(len(alters))), np.array(rows))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def svr_surrogate(p):
    """Cheap deterministic stand-in for validation MSE over the SVR space."""
    k = p["kernel"]
    if k == "rbf":
        return 0.1 + ((p["gamma"] - 12.3) / 50) ** 2 + ((p["C"] - 41.7) / 99) ** 2
    if k == "linear":
        return 0.3 + ((p["C"] - 70.2) / 99) ** 2
    return (0.2 + 0.05 * (p["degree"] - 3) ** 2 + ((p["C"] - 5234.0) / 19000) ** 2
            + (p["coef0"] - 0.47) ** 2)


def grid_best(space, fitness, resolution=0.05):
    """Exhaustive search on a grid of ``resolution`` per normalised continuous dimension.

    Integer and categorical dimensions are enumerated exactly; inactive
    dimensions are pinned to their lower bound so no point is counted twice.
    """
    import itertools

    lo, hi = space.lower, space.upper
    steps = int(round(1 / resolution))
    kernel_dims = [i for i, d in enumerate(space.dimensions) if d.kind == "categorical"]
    best = np.inf
    for cat_values in itertools.product(*[range(len(space.dimensions[i].choices)) for i in kernel_dims]):
        base = lo.copy()
        base[kernel_dims] = cat_values
        act = space.active(base)
        axes = []
        for i, d in enumerate(space.dimensions):
            if d.kind == "categorical" or not act[i]:
                axes.append([base[i]])
            elif d.kind == "integer":
                axes.append(list(np.arange(lo[i], hi[i] + 1)))
            else:
                axes.append(list(lo[i] + (hi[i] - lo[i]) * np.arange(steps + 1) / steps))
        for pos in itertools.product(*axes):
            best = min(best, fitness(space.decode(np.array(pos))))
    return best


def sphere(p):
    return p["x"] ** 2 + p["y"] ** 2


def rastrigin(p):
    x = np.array([p["x"], p["y"]])
    return float(10 * len(x) + np.sum(x * x - 10 * np.cos(2 * np.pi * x)))


# --- acceptance reporting ---------------------------------------------------------
# Tests marked ``criterion("name")`` get one PASS/FAIL line in the terminal summary,
# with whatever they stored under ``request.node.user_properties``.

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion with a summary line")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call" and not (report.when == "setup" and report.failed):
        return
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    _CRITERIA.append((mark.args[0], "PASS" if report.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in _CRITERIA:
        terminalreporter.write_line(f"{status}  {name}" + (f"  ({detail})" if detail else ""))
