import numpy as np
import pytest

from rfic.disorder import DisorderLaw, FieldWindow, WalkPath, walk_from_field

_CRITERIA: list[tuple[int, str, bool, str]] = []

# Reference walk used throughout the extrema tests (unit steps, S_0 = 0).
SAMPLE_STEPS = (1, 1, -1, 1, -1, -1, -1, 1, 1, 1, 1, -1, 1, 1, -1, -1, -1, -1, -1, 1,
              1, -1, 1, -1, 1, 1, 1, 1, 1, -1, 1, -1, -1, -1, -1, 1, -1, 1)


def walk_of(steps, origin: int = 0) -> WalkPath:
    h = np.asarray(steps, dtype=float)
    return WalkPath(origin, np.concatenate(([0.0], np.cumsum(h))), h)


def sawtooth_steps(periods: int, amplitude: int = 3) -> list[int]:
    """Unit steps for 0 -> +A -> -A -> +A -> ... ."""
    steps = [1] * amplitude
    for _ in range(periods):
        steps += [-1] * (2 * amplitude) + [1] * (2 * amplitude)
    return steps


@pytest.fixture
def sample_walk() -> WalkPath:
    return walk_of(SAMPLE_STEPS)


@pytest.fixture
def record_criterion():
    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        _CRITERIA.append((number, title, bool(ok), detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, title, ok, detail in sorted(_CRITERIA):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} [{detail}]")


class PeriodicSource:
    """Deterministic field repeating ``steps`` forever in both directions;
    site 1 carries ``steps[0]``."""

    def __init__(self, steps, law: str = "twopoint:1"):
        self.steps = np.asarray(steps, dtype=float)
        self.law = DisorderLaw.parse(law)
        self.seed = 0

    def field(self, lo: int, hi: int) -> FieldWindow:
        idx = (np.arange(lo, hi + 1) - 1) % self.steps.size
        return FieldWindow(lo, self.steps[idx])

    def walk(self, lo: int, hi: int) -> WalkPath:
        return walk_from_field(self.field(lo + 1, hi))
