import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    card = getattr(mod, "SCORECARD", None)
    if card:
        terminalreporter.section("acceptance criteria")
        for key in sorted(card):
            terminalreporter.write_line(card[key])
