import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from allcloud.scattering import SynthConfig, generate_scene  # noqa: E402

SEEDS = list(range(1, 11))
ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def scene(seed, **overrides):
    return generate_scene(SynthConfig(seed=seed, **overrides))


@pytest.fixture
def scene_factory():
    return scene


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
