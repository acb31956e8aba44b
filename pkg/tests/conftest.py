import pytest

from ndax import FIXTURES
from ndax.lang import load_mapping, load_program, load_theory


def _load(name):
    return load_theory(FIXTURES / name)


@pytest.fixture(scope="session")
def tire():
    hl = _load("tire_hl.ndt")
    ll = _load("tire_ll.ndt")
    m = load_mapping(FIXTURES / "tire.ndm", hl, ll)
    go = load_program(FIXTURES / "go.ndp", hl)
    return hl, ll, m, go


@pytest.fixture(scope="session")
def tt_plus():
    hl = _load("tt_plus_hl.ndt")
    ll = _load("tt_plus_ll.ndt")
    return hl, ll, load_mapping(FIXTURES / "tt_plus.ndm", hl, ll)


@pytest.fixture(scope="session")
def logistics():
    hl = _load("logistics_hl.ndt")
    ll = _load("logistics_ll.ndt")
    return hl, ll, load_mapping(FIXTURES / "logistics.ndm", hl, ll)


@pytest.fixture(scope="session")
def mutant():
    """Load a file from the mutants directory."""
    def get(name):
        return _load("mutants/" + name)

    return get
