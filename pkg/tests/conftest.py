import numpy as np
import pytest

from coupledmimo.channel import RfChain
from coupledmimo.netparams import FrequencyGrid, synth_coupled_array


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_pd(rng, n, floor=1.0):
    g = crandn(rng, n, n)
    return g @ g.conj().T + floor * np.eye(n)


def coupled_s(n, coupling=0.7, seed=3, f=1e9):
    grid = FrequencyGrid.linspace(0.5e9, 1.5e9, 11)
    return synth_coupled_array(n, coupling, 0.5, grid, seed).at(f)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def chain():
    return RfChain()


@pytest.fixture
def s2():
    return coupled_s(2)


@pytest.fixture
def s4():
    return coupled_s(4, coupling=0.9, seed=5)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[str, str] = {}


def report_criterion(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[name] = f"{name} {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda n: int(n[1:])):
        terminalreporter.write_line(ACCEPTANCE[name])
