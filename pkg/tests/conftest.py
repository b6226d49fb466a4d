import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from exlab.synthdata import DatasetSpec, generate  # noqa: E402
from exlab.victim import Architecture, train_victim, train_victim_watermarked  # noqa: E402

ACCEPTANCE_KEY = pytest.StashKey[list]()

TINY_SPEC = DatasetSpec(n_classes=4, samples_per_class=30, test_samples_per_class=20, image_size=8)
TINY_ARCH = Architecture(hidden=(32,), rep_dim=8, head_hidden=16, proj_dim=8, predictor_hidden=16)


@pytest.fixture(scope="session")
def tiny_data():
    return generate(TINY_SPEC)


@pytest.fixture(scope="session")
def tiny_victim(tiny_data):
    return train_victim(tiny_data["train"], arch=TINY_ARCH, epochs=5, batch=32, seed=0)


@pytest.fixture(scope="session")
def tiny_wm_victim(tiny_data):
    return train_victim_watermarked(tiny_data["train"], arch=TINY_ARCH, epochs=5, batch=32, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
