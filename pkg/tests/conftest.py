import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from viscontact.assembly import assemble  # noqa: E402
from viscontact.geometry import make_box_mesh  # noqa: E402
from viscontact.material import MaterialParams  # noqa: E402

REPO = Path(__file__).resolve().parents[1]
REFERENCE_CFG = REPO / "configs" / "reference.cfg"
REFERENCE_MATERIAL = MaterialParams(lam=1.0, mu=1.0, theta=0.1, xi=1.0, rho=0.05)

# acceptance criterion number -> {part: (ok, detail)}; one summary line per criterion
ACCEPTANCE_PARTS: dict = {}


def acceptance_line(number: int, title: str) -> str:
    parts = ACCEPTANCE_PARTS[number]["parts"]
    ok = all(p[0] for p in parts.values())
    detail = "; ".join(d if name is None else f"{name}: {d}" for name, (_, d) in parts.items())
    return f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"


def record_acceptance(number: int, title: str, ok: bool, detail: str, part: str | None = None) -> None:
    entry = ACCEPTANCE_PARTS.setdefault(number, {"title": title, "parts": {}})
    entry["parts"][part] = (bool(ok), detail)
    print(acceptance_line(number, title))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_PARTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_PARTS):
            terminalreporter.write_line(acceptance_line(k, ACCEPTANCE_PARTS[k]["title"]))


def unit_cube(n: int, face: str = "+z"):
    return make_box_mesh([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], (n, n, n), face)


@pytest.fixture(scope="session")
def material():
    return REFERENCE_MATERIAL


@pytest.fixture(scope="session")
def cube1_sys():
    return assemble(unit_cube(1), REFERENCE_MATERIAL)


@pytest.fixture(scope="session")
def cube2_sys():
    return assemble(unit_cube(2), REFERENCE_MATERIAL)


@pytest.fixture(scope="session")
def cube4_sys():
    return assemble(unit_cube(4), REFERENCE_MATERIAL)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
