import numpy as np
import pytest

from uavmcts.config import WorldConfig
from uavmcts.env import UavMecEnv
from uavmcts.layout import hover_layout, initial_users


def make_env(seed: int = 0, **overrides) -> UavMecEnv:
    cfg = WorldConfig(**overrides)
    rng = np.random.default_rng(seed)
    return UavMecEnv(cfg, hover_layout(cfg, rng), initial_users(cfg, rng))


@pytest.fixture
def env():
    return make_env()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion:>2}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
        terminalreporter.write_line(line)
