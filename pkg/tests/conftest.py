"""Shared fixtures: the worked identifiability example and the four-team graph."""

import numpy as np

from plusdc.hypergraph import Hypergraph
from plusdc.model import make_dataset


def toy_multiway_dataset():
    """One 4-way and two pairwise comparisons with 2-dim covariates."""
    return make_dataset(
        4,
        2,
        [
            (
                (1, 2, 3, 4),
                np.array([[-1.0, 1.0], [3.0, -1.0], [-4.0, 2.0], [0.0, -3.0]]),
                (1, 3, 4, 2),
            ),
            ((3, 4), np.array([[-2.0, 1.0], [-3.0, 4.0]]), (4, 3)),
            ((2, 4), np.array([[0.0, -1.0], [-3.0, 4.0]]), (2, 4)),
        ],
    )


TOY_K = np.array([[4.0, -2.0], [-3.0, 1.0], [1.0, -4.0], [-1.0, 3.0], [-3.0, 5.0]])
TOY_Q = np.array(
    [
        [-1.0, -1.0, -1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0, -1.0],
        [0.0, 1.0, 0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0, 1.0, 1.0],
    ]
)


def four_team_graph() -> Hypergraph:
    """Five pairwise matches among four teams."""
    return Hypergraph(n=4, edges=((1, 2), (1, 4), (2, 3), (2, 4), (3, 4)))
