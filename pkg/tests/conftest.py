import numpy as np
import pytest

from hmmar import HmMarModel, shipped_model

P_SHIPPED = [[0.8077, 0.1923], [0.7619, 0.2381]]

# First-order reference models used by the Monte Carlo checks.
REFERENCE_MODELS = {
    "two_regime": HmMarModel(2, 1, [[1.0, 0.5], [-1.0, 0.3]], [1.0, 0.5], [[0.9, 0.1], [0.2, 0.8]], [1.0, 0.0]),
    "shipped_order_one": HmMarModel(2, 1, [[0.0, 0.7], [0.0, 0.5]], [1.0, 1.0], P_SHIPPED, [1.0, 0.0]),
    "explosive_mix": HmMarModel(2, 1, [[1.0, 1.2], [0.5, 0.1]], [0.5, 1.0], [[0.3, 0.7], [0.2, 0.8]], [1.0, 0.0]),
}


@pytest.fixture
def shipped():
    return shipped_model()


@pytest.fixture(params=sorted(REFERENCE_MODELS))
def reference_model(request):
    return REFERENCE_MODELS[request.param]


def ar1(c=0.0, r=0.5, s=1.0):
    return HmMarModel(1, 1, [[c, r]], [s], [[1.0]], [1.0])


def two_regime(a0=(0.0, 0.0), a1=(0.7, 0.5), sig=(1.0, 1.0), P=P_SHIPPED, rho=(1.0, 0.0)):
    return HmMarModel(2, 1, np.column_stack([a0, a1]), sig, P, rho)


# One line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
