import numpy as np
import pytest

from kwreply.pipeline import synthetic_model, train_model


@pytest.fixture(scope="session")
def trained():
    """The 50-pair template fixture trained long enough to reproduce its replies."""
    model, marked = synthetic_model(seed=0, n_pairs=50)
    history = train_model(model, marked, epochs=40)
    return model, marked, history


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
