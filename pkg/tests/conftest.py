import pytest

from pdmeta.config import get_settings
from pdmeta.services.funcspace import constant, monomial
from pdmeta.services.generator import GeneratorSpec, construct
from pdmeta.services.quadrature import get_antiderivative_cache


@pytest.fixture(autouse=True)
def _fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def clean_cache():
    cache = get_antiderivative_cache()
    cache.clear()
    yield cache
    cache.clear()


@pytest.fixture
def example_1a_spec():
    return GeneratorSpec(dimension=3, ell=0, mass=monomial(0.5, 2), f=monomial(1.0, 1))


@pytest.fixture
def example_1a(example_1a_spec):
    return construct(example_1a_spec)


@pytest.fixture
def trivial_spec():
    return GeneratorSpec(dimension=3, ell=0, mass=constant(0.5), f=constant(0.0))
