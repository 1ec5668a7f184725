import numpy as np
import pytest

from radarsort.domain import ClassificationWindow, RangeAxis


@pytest.fixture
def axis():
    return RangeAxis()


@pytest.fixture
def random_window():
    def make(seed, n_frames=30, n_bins=120):
        rng = np.random.default_rng(seed)
        amps = rng.random((n_frames, n_bins))
        return ClassificationWindow(amps, RangeAxis(100.0, 2.5, n_bins), n_frames)

    return make


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance-criterion outcome for the end-of-run summary."""

    def record(number, title, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {number}: {title}"
        if detail:
            line += f" -- {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
