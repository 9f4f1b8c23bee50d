import numpy as np
import pytest

from cloakbound.geometry import Rectangle, build_mesh, mark_obstacle
from cloakbound.materials import ConstantTensor, LorentzSum, PermittivityModel, Pole

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}

STANDARD_OBSTACLE = Rectangle(0.25, 0.25, 0.75, 0.75)
INTERVAL = (0.5, 1.0)


def record_acceptance(number: int, title: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE[number] = (title, bool(ok), detail)
    print(f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}: {title} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{n:2d} {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def mesh12():
    return build_mesh(12, 12)


@pytest.fixture(scope="session")
def mesh16():
    return build_mesh(16, 16)


@pytest.fixture(scope="session")
def mesh32():
    return build_mesh(32, 32)


def two_phase(mesh, cloak_law, obstacle_law=None, interval=INTERVAL, eps0=1.0):
    mask = mark_obstacle(mesh, STANDARD_OBSTACLE)
    obstacle_law = ConstantTensor(2 * np.eye(2)) if obstacle_law is None else obstacle_law
    return mask, PermittivityModel.two_phase(mask, obstacle_law, cloak_law, eps0, interval)


def lorentz(wp2=1.0, w0=2.0, gamma=0.0):
    return LorentzSum((Pole(wp2, w0, gamma),))


def layered_field(mesh, left=1.0, right=3.0):
    a = np.where(mesh.centroids[:, 0] < 0.5 * mesh.width, left, right)
    return a[:, None, None] * np.eye(2)
