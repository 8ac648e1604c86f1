import pytest

from srg_lab.operators import Integrator, Negate, ParallelSum, StaticNonlinearity, lag, static_gain
from srg_lab.sampler import ExcitationConfig, sample_hard_srg, sample_soft_srg


def fixture_plant():
    """Strictly passive plant: 0.25 plus a unit lag."""
    return ParallelSum((static_gain(0.25), lag()))


def fixture_controller():
    return Negate(StaticNonlinearity("tanh_gain", {"k": 1.0}))


# Passivity indices of the fixture plant: with a = 1/(1+w^2), Re H = 0.25 + a and
# |H|^2 = 0.0625 + 1.5a, so Re H - 0.15 - 0.4|H|^2 = 0.075 + 0.4a > 0 (grid check in test_acceptance).
DELTA, EPSILON = 0.15, 0.4


@pytest.fixture(scope="session")
def base_cfg():
    return ExcitationConfig()


@pytest.fixture(scope="session")
def integrator_soft(base_cfg):
    return sample_soft_srg(Integrator(), base_cfg)


@pytest.fixture(scope="session")
def integrator_hard(base_cfg):
    return sample_hard_srg(Integrator(), base_cfg)


@pytest.fixture(scope="session")
def lag_soft():
    return sample_soft_srg(lag(), ExcitationConfig(n_pairs=500, seed=7))


@pytest.fixture(scope="session")
def plant_hard(base_cfg):
    return sample_hard_srg(fixture_plant(), base_cfg)


@pytest.fixture(scope="session")
def controller_hard(base_cfg):
    return sample_hard_srg(fixture_controller(), base_cfg)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
