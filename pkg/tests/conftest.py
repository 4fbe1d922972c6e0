import pytest

from models.cadlag import Grid
from models.stream import StreamKey
from services.coefficient_service import CoefficientService
from services.config_service import ConfigService
from services.innovation_service import InnovationService
from services.series_service import SeriesService
from services.tail_service import TailService

SMALL_PATH_CONFIG = """
# small path experiment used across tests
[run]
name = small-path
seed = 11
pipeline = path
resolution = 20
n = 300

[innovation]
kind = compound-poisson-path
alpha = 1.5
rate = 2.0
p = 0.5

[coefficients]
kind = finite-list
profiles = flat
weights = 1.0

[series]
truncation = fixed
terms = 1

[estimators]
delta_grid = 0.5, 0.1, 0.05
moment_samples = 20
bootstrap = 20
"""


@pytest.fixture
def grid():
    return Grid(10)


@pytest.fixture
def key():
    return StreamKey(20240607)


@pytest.fixture
def innovations():
    return InnovationService()


@pytest.fixture
def coefficients(innovations):
    return CoefficientService(innovations)


@pytest.fixture
def series(innovations, coefficients):
    return SeriesService(innovations, coefficients)


@pytest.fixture
def tails(innovations, coefficients):
    return TailService(innovations, coefficients)


@pytest.fixture
def configs():
    return ConfigService()


@pytest.fixture
def small_path_config(configs):
    return configs.parse_config(SMALL_PATH_CONFIG)


@pytest.fixture
def small_path_text():
    return SMALL_PATH_CONFIG
