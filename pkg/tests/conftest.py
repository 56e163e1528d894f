import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bestk.harness.fixtures import fig3_trie, random_trie
from bestk.models import TrieModel

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def leaf_trie(probs):
    """Root branches straight to EOS-terminated one-token leaves."""
    return TrieModel.from_spec({"tree": {f"w{i}": {"prob": p} for i, p in enumerate(probs)}})


@pytest.fixture
def skier():
    return fig3_trie()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tries():
    rng = np.random.default_rng(99)
    return [random_trie(rng) for _ in range(20)]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda l: int(l.split()[0][2:])):
            terminalreporter.write_line(line)
