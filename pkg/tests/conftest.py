import os
from pathlib import Path

import pytest

from segeo.experiments import KernelSource
from segeo.kernels import CACHE_ENV, GridShape, KernelParams, connectivity_kernel

SMALL = GridShape(nx=41, ny=41, ntheta=32, half_x=20.0, half_y=20.0)


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory) -> Path:
    """Kernel cache shared by the whole run; reuses $SEGEO_KERNEL_CACHE when set."""
    env = os.environ.get(CACHE_ENV)
    if env:
        p = Path(env)
        p.mkdir(parents=True, exist_ok=True)
        return p
    return tmp_path_factory.mktemp("kernels")


@pytest.fixture(scope="session")
def source(cache_dir) -> KernelSource:
    """Full-size kernels (10^6 paths, default grid)."""
    return KernelSource(KernelParams(), cache_dir=cache_dir, workers=os.cpu_count())


@pytest.fixture(scope="session")
def fp30(source):
    return source.get("fp", "polarized", 30)


@pytest.fixture(scope="session")
def small_fp():
    """Cheap symmetrized FP kernel on a 40x40 pixel window."""
    return connectivity_kernel(KernelParams(n_paths=40_000, H=15), SMALL)


# --------------------------------------------------------------------------
# acceptance report: one line per criterion at the end of the run

_CRITERIA: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def criterion():
    """``record(number, title, passed, detail)`` stores a line and returns ``passed``."""

    def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
        _CRITERIA[number] = (title, bool(passed), detail)
        print(_line(number, title, passed, detail))
        return bool(passed)

    return record


def _line(number, title, passed, detail):
    return f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_line(n, *_CRITERIA[n]))
