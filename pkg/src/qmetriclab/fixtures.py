"""Built-in towers and spaces used by the CLI, the test suites, and docs."""
from __future__ import annotations

import numpy as np

from .spaces import FiniteMetricSpace
from .towers import BetaSequence, BratteliTower, tower_from_config

__all__ = [
    "TOWER_CONFIGS",
    "SPACE_CONFIGS",
    "builtin_tower",
    "builtin_space",
]

TOWER_CONFIGS: dict[str, dict] = {
    # binary tower [1] -> [2] -> [4] -> [8], multiplicity 2 at each step
    "car4": {
        "levels": [[1], [2], [4], [8]],
        "mults": [[[2]], [[2]], [[2]]],
        "top_trace": [0.125],
        "beta": [1.0, 1.0, 0.5],
    },
    # smallest tower with a nontrivial ideal lattice
    "t2": {
        "levels": [[1], [1, 1], [2, 1]],
        "mults": [[[1], [1]], [[1, 1], [0, 1]]],
        "top_trace": [1 / 3, 1 / 3],
        "beta": [1.0, 1.0],
    },
    # the same pattern continued to five levels (top blocks [4, 1])
    "t2x4": {
        "levels": [[1], [1, 1], [2, 1], [3, 1], [4, 1]],
        "mults": [
            [[1], [1]],
            [[1, 1], [0, 1]],
            [[1, 1], [0, 1]],
            [[1, 1], [0, 1]],
        ],
        "top_trace": [0.2, 0.2],
        "beta": [1.0, 1.0, 0.5, 1 / 6],
    },
}

SPACE_CONFIGS: dict[str, dict] = {
    "two_points": {"labels": ["p", "q"], "dist": [[0.0, 1.0], [1.0, 0.0]]},
    "line3": {
        "labels": ["0", "0.1", "1"],
        "dist": [
            [0.0, 0.1, 1.0],
            [0.1, 0.0, 0.9],
            [1.0, 0.9, 0.0],
        ],
    },
}


def builtin_tower(name: str) -> tuple[BratteliTower, BetaSequence]:
    if name not in TOWER_CONFIGS:
        raise KeyError(f"unknown tower fixture {name!r}")
    tower, beta = tower_from_config(TOWER_CONFIGS[name])
    assert beta is not None
    return tower, beta


def builtin_space(name: str) -> FiniteMetricSpace:
    if name not in SPACE_CONFIGS:
        raise KeyError(f"unknown space fixture {name!r}")
    return FiniteMetricSpace.from_config(SPACE_CONFIGS[name])


def random_space(
    rng: np.random.Generator, max_points: int, min_points: int = 2
) -> FiniteMetricSpace:
    """Euclidean point cloud in the plane with a minimum separation."""
    n = int(rng.integers(min_points, max_points + 1))
    while True:
        pts = rng.uniform(0.0, 1.0, size=(n, 2))
        diff = pts[:, None, :] - pts[None, :, :]
        d = np.sqrt((diff * diff).sum(axis=2))
        off = d[~np.eye(n, dtype=bool)]
        if n == 1 or off.min() > 1e-3:
            break
    return FiniteMetricSpace(tuple(f"p{i}" for i in range(n)), d)
