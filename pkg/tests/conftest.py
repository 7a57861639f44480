import numpy as np
import pytest

from scenic import env
from scenic.trace import bundled_action_model, bundled_trace, playback


@pytest.fixture(scope="session")
def action_model():
    return bundled_action_model()


@pytest.fixture(scope="session")
def tour_archive():
    return playback(bundled_trace("gridquest_tour"), "gridquest")


def random_state(game, rng, max_actions=40):
    """A state reached by a random walk from boot (biased toward START so
    menus do not dominate)."""
    state = env.boot(game)
    masks = [0, 1, 2, 4, 8, 16, 32, 64, 64, 1 | 8, 16 | 8]
    for _ in range(rng.integers(0, max_actions)):
        state = env.step(state, env.ControllerState(int(rng.choice(masks))), int(rng.integers(1, 40)))
    return state


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter, config):
    from test_acceptance import ACCEPTANCE_KEY

    lines = config.stash.get(ACCEPTANCE_KEY, None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
