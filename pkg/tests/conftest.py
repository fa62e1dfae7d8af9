from pathlib import Path

import numpy as np
import pytest

from kronlyap import SwitchedSystem, certify

SYSTEMS_DIR = Path(__file__).resolve().parent.parent / "systems"


@pytest.fixture(scope="session")
def demo_system():
    """Bundled two-mode planar system, stable under arbitrary switching."""
    return SwitchedSystem.load(SYSTEMS_DIR / "two_mode_demo.json")


@pytest.fixture(scope="session")
def unstable_system():
    return SwitchedSystem(n=2, modes=(np.eye(2),), labels=("expanding",))


@pytest.fixture(scope="session")
def cert_c1(demo_system):
    return certify(demo_system, 1, objective="x1")


@pytest.fixture(scope="session")
def cert_c2(demo_system):
    return certify(demo_system, 2, objective="x1")
