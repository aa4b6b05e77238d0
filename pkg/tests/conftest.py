import sys
from pathlib import Path

import numpy as np
import pytest

from masonry_modal.builders import beam_document
from masonry_modal.model import load_model
from masonry_modal.modal import prestressed_modal

ROOT = Path(__file__).resolve().parents[1]
MODELS = ROOT / "models"
sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def models_dir():
    return MODELS


@pytest.fixture(scope="session")
def beam60():
    return load_model(MODELS / "beam60.json")


@pytest.fixture(scope="session")
def beam60_staged(beam60):
    return prestressed_modal(beam60, beam60.load_case("staged"), n_modes=6)


@pytest.fixture(scope="session")
def beam_eb():
    return load_model(beam_document(shear=False))


@pytest.fixture(scope="session")
def arch():
    return load_model(MODELS / "arch.json")


@pytest.fixture(scope="session")
def tower():
    return load_model(MODELS / "tower.json")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
