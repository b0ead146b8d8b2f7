import numpy as np
import pytest

from neural_ac import mdp as mdp_core


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_state():
    return mdp_core.two_state_fixture(gamma=0.9)


def random_fixture(seed: int, n_states: int = 4, n_actions: int = 3, gamma: float = 0.9):
    rng = np.random.default_rng(seed)
    mdp = mdp_core.random_mdp(rng, n_states, n_actions, gamma)
    return mdp, mdp_core.random_policy(rng, mdp), rng


def central_difference(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2 * h)
    return out


# acceptance verdicts, echoed in the terminal summary so they survive output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
