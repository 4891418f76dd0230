import os
from pathlib import Path

import pytest

from sympow.engine import Engine

MESH_DIR = Path(os.environ.get("SYMPOW_TEST_MESH_DIR", Path(__file__).resolve().parents[1] / ".mesh_cache"))


@pytest.fixture(scope="session")
def engine():
    """One engine for the whole run, with an on-disk mesh cache that survives reruns."""
    return Engine(mesh_dir=MESH_DIR)


@pytest.fixture(scope="session")
def mesh_dir():
    return MESH_DIR


# criterion number -> (title, passed); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, bool]] = {}


def record_criterion(number: int, title: str, passed: bool) -> None:
    """Fold one check into the criterion's verdict (a criterion fails if any check fails)."""
    old = ACCEPTANCE.get(number, (title, True))[1]
    ACCEPTANCE[number] = (title, old and passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}")
