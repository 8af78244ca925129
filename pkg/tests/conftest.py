import numpy as np
import pytest

from syndcorr.code_model import build_layout, build_schedule, enumerate_fault_catalog
from syndcorr.correlation_inference import cycle_average, default_support, estimate_moments, infer_probabilities
from syndcorr.decoder import MatchingDecoder
from syndcorr.noise_sim import NoiseParams, simulate_circuit


@pytest.fixture(scope="session")
def layout():
    return build_layout(3)


@pytest.fixture(scope="session")
def sched4(layout):
    return build_schedule(layout, 4, "Z")


@pytest.fixture(scope="session")
def catalog4(sched4):
    return enumerate_fault_catalog(sched4)


@pytest.fixture(scope="session")
def data4(sched4):
    return simulate_circuit(sched4, NoiseParams(), 20000, 11)


@pytest.fixture(scope="session")
def model4(sched4, data4):
    sup = default_support(sched4)
    return infer_probabilities(estimate_moments(data4, sup), sup, n_boot=10, seed=0)


@pytest.fixture(scope="session")
def avg4(model4, sched4):
    return cycle_average(model4, sched4)


@pytest.fixture(scope="session")
def decoder4(avg4, sched4):
    return MatchingDecoder.from_model(avg4, sched4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
