"""Shared data builders for the tests."""

import numpy as np

from revpref.sim import CobbDouglasAgent, generate, random_probes


def simulate(seed: int, sigma: float = 0.0, alpha=(1.0, 1.0), T: int = 50):
    agent = CobbDouglasAgent(alpha=alpha, noise_sigma=sigma)
    rng = np.random.default_rng(seed)
    return generate(agent, random_probes(T, 2, rng), rng)


# acceptance results, criterion number -> (passed, detail); printed by conftest
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)
    assert passed, detail
