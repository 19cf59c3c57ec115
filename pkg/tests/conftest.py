import numpy as np
import pytest

from periodic_recon.spectral import PeriodicSignal, parse_operator

TABLE_OPERATORS = ("D", "D+I", "D2", "D2+4pi2I")


def random_real_signal(rng, n_coef, decay=1.0):
    """Hermitian coefficients with ``|c[k]| ~ (1+|k|)^-decay``."""
    pos = (rng.standard_normal(n_coef) + 1j * rng.standard_normal(n_coef)) / np.arange(2, n_coef + 2) ** decay
    c = np.concatenate([np.conj(pos[::-1]), [rng.standard_normal()], pos])
    return PeriodicSignal(c, real=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(params=TABLE_OPERATORS)
def table_op_name(request):
    return request.param


@pytest.fixture
def small_ops():
    return {name: parse_operator(name, 64) for name in TABLE_OPERATORS}


ACCEPTANCE_LINES: dict[int, str] = {}


def report_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
