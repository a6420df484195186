import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ergotest import HMMModel, IIDModel, MarkovModel, MixtureModel, RotationModel

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def record(request):
    """Log one acceptance verdict; printed in the terminal summary."""
    log = request.config.stash.setdefault(_ACCEPTANCE, [])

    def _record(name, ok, detail=""):
        log.append((name, bool(ok), detail))
        return ok

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_ACCEPTANCE, [])
    if not log:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, ok, detail in log:
        terminalreporter.write_line(f"{name}: {'PASS' if ok else 'FAIL'}  {detail}")


def fixture_models():
    """Binary models of every kind, shared by the property suites."""
    return {
        "iid": IIDModel.bernoulli(0.3),
        "markov1": MarkovModel.binary(0.2, 0.7),
        "markov2": MarkovModel(2, [[0.1, 0.9], [0.9, 0.1], [0.9, 0.1], [0.1, 0.9]]),
        "flip": MarkovModel.flip(),
        "hmm": HMMModel([[0.9, 0.1], [0.2, 0.8]], [[0.8, 0.2], [0.3, 0.7]]),
        "mixture": MixtureModel([0.4, 0.6], [IIDModel.bernoulli(0.1), MarkovModel.binary(0.5, 0.9)]),
        "rotation": RotationModel(),
    }


@pytest.fixture(params=sorted(fixture_models()))
def model(request):
    return fixture_models()[request.param]


@pytest.fixture
def gen():
    return np.random.default_rng(12345)
