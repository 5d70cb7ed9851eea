"""Shared strategies and small fixtures for the test suite."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from laddermdp.core import Ladder, ModelParams


def model_params(
    incentivizable: bool | None = None,
    with_delta: bool = True,
    beta=st.floats(0.3, 0.9),
    gamma=st.floats(0.3, 0.9),
):
    """Strategy over ModelParams; incentivizable=True/False pins the
    c_minus side of the phase boundary (1-beta*gamma)*c_plus."""

    @st.composite
    def build(draw):
        b = draw(beta)
        g = draw(gamma)
        cp = draw(st.floats(0.5, 2.0))
        crit = (1.0 - b * g) * cp
        if incentivizable is None:
            cm = draw(st.floats(0.1, 3.0))
        elif incentivizable:
            cm = crit * draw(st.floats(1.1, 3.0))
        else:
            cm = crit * draw(st.floats(0.2, 0.9))
        d = draw(st.floats(0.0, 0.5)) if with_delta else 0.0
        r = draw(st.floats(0.5, 2.0))
        return ModelParams(beta=b, gamma=g, delta=d, c_plus=cp, c_minus=cm, r=r)

    return build()


def ladders(max_levels: int = 4, max_gap: float = 3.0):
    @st.composite
    def build(draw):
        n = draw(st.integers(2, max_levels))
        gaps = draw(
            st.lists(st.floats(0.2, max_gap), min_size=n - 1, max_size=n - 1)
        )
        mu = [0.0]
        for g in gaps:
            mu.append(mu[-1] + g)
        return Ladder(tuple(mu))

    return build()


def lipschitz_rows(levels: int, n: int, c_plus: float, dx: float, seed: int) -> np.ndarray:
    """Non-decreasing rows with increments in [0, c_plus*dx]."""
    rng = np.random.default_rng(seed)
    inc = rng.uniform(0.0, c_plus * dx, size=(levels, n - 1))
    rows = np.concatenate([np.zeros((levels, 1)), np.cumsum(inc, axis=1)], axis=1)
    return rows + rng.uniform(-1.0, 1.0, size=(levels, 1))
