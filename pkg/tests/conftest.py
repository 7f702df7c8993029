import numpy as np
import pytest

from equibound import GaussianChannel, HypothesisModel, Prior, sample_joint


def gaussian_model(means, variance=1.0, prior=None):
    means = np.asarray(means, dtype=float)
    M = means.shape[0]
    prior = Prior.uniform(M) if prior is None else Prior(np.asarray(prior, dtype=float))
    return HypothesisModel(prior, GaussianChannel(means, variance))


@pytest.fixture(scope="session")
def noninformative_batch():
    # all means equal: posterior is the prior on every draw
    return sample_joint(gaussian_model(np.zeros(4)), 2000, 1)


@pytest.fixture(scope="session")
def deterministic_batch():
    return sample_joint(gaussian_model([0.0, 100.0, 200.0, 300.0]), 2000, 2)


@pytest.fixture(scope="session")
def binary_batch():
    return sample_joint(gaussian_model([-0.5, 0.5]), 100_000, 3)


@pytest.fixture(scope="session")
def mixed_batch():
    # M = 5, non-uniform prior, 2-D outputs, overlapping classes
    rng = np.random.default_rng(7)
    means = rng.normal(size=(5, 2)) * 1.5
    prior = np.array([0.3, 0.25, 0.2, 0.15, 0.1])
    return sample_joint(gaussian_model(means, 1.0, prior), 20_000, 4)


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def acceptance_log():
    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
