import numpy as np
import pytest

import gradcon as gc


@pytest.fixture(scope="session")
def solve_cache():
    """Memoized continuation runs shared across test modules.

    Keys are (scenario_name, n); values are (DiscreteProblem, solution,
    diagnostics).
    """
    cache = {}

    def get(name: str, n: int):
        key = (name, n)
        if key not in cache:
            dp = gc.DiscreteProblem.from_spec(gc.scenario(name, n=n))
            sol, diag = gc.continuation_solve(dp)
            cache[key] = (dp, sol, diag)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
