import pytest
from hypothesis import HealthCheck, settings

from pixelwatt.colorspace import ColorSpace
from pixelwatt.powermodel import ChannelPowerParams, PowerModel

# One profile for the whole suite: no wall-clock deadline (CI boxes vary) and
# derandomized so runs are reproducible.
settings.register_profile(
    "suite",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def quad_model() -> PowerModel:
    """Pure quadratic display: closed-form calibration anchors exist."""
    return PowerModel(
        channels=tuple(ChannelPowerParams(2.0, 0.0, 0.0) for _ in range(3)),
        space=ColorSpace.SRGB,
    )


@pytest.fixture
def synthetic_model() -> PowerModel:
    """The bundled synthetic display, constructed directly."""
    return PowerModel(
        channels=(
            ChannelPowerParams(1.9, 0.05, 0.01 / 3),
            ChannelPowerParams(2.0, 0.06, 0.01 / 3),
            ChannelPowerParams(2.2, 0.04, 0.01 / 3),
        ),
        space=ColorSpace.SRGB,
        note="synthetic display model, not measured hardware",
    )


def pytest_configure(config):
    config._acceptance_results = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None and report.when == "call":
        criterion = marker.kwargs.get("criterion", marker.args[0] if marker.args else item.name)
        item.config._acceptance_results.append((criterion, report.outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance_results", [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, outcome in results:
        tag = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"[{tag}] {criterion}")
