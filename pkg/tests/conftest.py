import numpy as np
import pytest

from expander_lab import plane, solve_for_cone

# the three reference cones used across the suite; session scope because a
# solve costs a few hundred ms and every module pokes at the same surfaces
CASES = ((2, 0.5), (2, 1.0), (3, 0.5))


@pytest.fixture(scope="session")
def expander_half():
    return solve_for_cone(0.5, 2)


@pytest.fixture(scope="session")
def expander_one():
    return solve_for_cone(1.0, 2)


@pytest.fixture(scope="session")
def expander_three():
    return solve_for_cone(0.5, 3)


@pytest.fixture(scope="session")
def trio(expander_half, expander_one, expander_three):
    return (expander_half, expander_one, expander_three)


@pytest.fixture(scope="session")
def flat():
    return plane(2, span=20.0, nodes=2000)


@pytest.fixture(scope="session")
def fine_half():
    return solve_for_cone(0.5, 2, nodes=4000)


@pytest.fixture(scope="session")
def long_half():
    # long span so every exhaustion ball contains the asymptotic-extension
    # cutoff band [4, 8]
    return solve_for_cone(0.5, 2, rho_max=60.0, nodes=6000)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260815)
