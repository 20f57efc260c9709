import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from curl_lab import InitialDistribution, MdpShape, Policy, TransitionKernel  # noqa: E402


def random_kernel(rng, shape: MdpShape, concentration=1.0) -> TransitionKernel:
    x, a, n = shape.num_states, shape.num_actions, shape.horizon
    return TransitionKernel(rng.dirichlet(np.full(x, concentration), size=(n, x, a)))


def random_policy(rng, shape: MdpShape, concentration=1.0, floor=0.0) -> Policy:
    x, a, n = shape.num_states, shape.num_actions, shape.horizon
    p = rng.dirichlet(np.full(a, concentration), size=(n, x))
    if floor:
        p = (p + floor) / (1 + a * floor)
    return Policy(p)


def random_mu0(rng, shape: MdpShape) -> InitialDistribution:
    return InitialDistribution(rng.dirichlet(np.ones(shape.num_states * shape.num_actions))
                               .reshape(shape.num_states, shape.num_actions))


def random_instance(seed, shape: MdpShape, floor=0.0):
    rng = np.random.default_rng(seed)
    return random_kernel(rng, shape), random_policy(rng, shape, floor=floor), random_mu0(rng, shape)


@pytest.fixture
def small_shape():
    return MdpShape(3, 2, 3)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not getattr(module, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(module.RESULTS, key=lambda s: int(s[2:s.index("]")])):
        terminalreporter.write_line(line)
