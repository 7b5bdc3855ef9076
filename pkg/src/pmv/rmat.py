"""Recursive-quadrant random graph generation.

Each edge picks one of four matrix quadrants per recursion level with
probabilities (a, b, c, d) and descends until a single cell remains, which
yields the heavy-tailed degree distributions typical of real networks
when the probabilities are skewed.  The draw count is the requested edge
count; duplicate cells are kept here and collapsed by the partitioner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .edgelist import EdgeList, from_records

PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class RmatParams:
    scale: int  # vertex universe is 2**scale
    edges: int
    a: float = 0.57
    b: float = 0.19
    c: float = 0.19
    d: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.scale < 0:
            raise ValueError("scale must be >= 0")
        if self.edges < 0:
            raise ValueError("edge count must be >= 0")
        probs = (self.a, self.b, self.c, self.d)
        if any(p < 0 or p > 1 for p in probs):
            raise ValueError("quadrant probabilities must lie in [0, 1]")
        if abs(sum(probs) - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"quadrant probabilities sum to {sum(probs)!r}, not 1")


def generate_rmat(params: RmatParams) -> EdgeList:
    """Draw exactly ``params.edges`` edges, deterministically per seed.

    Quadrant a is the top-left of the adjacency matrix (rows are sources):
    b sets a destination bit, c a source bit, d both.  The returned edge
    list keeps the full 2**scale universe explicit, so follow-up stages
    see the declared vertex count even if some ids never appear.
    """
    rng = np.random.default_rng(params.seed)
    n_edges = params.edges
    src = np.zeros(n_edges, dtype=np.int64)
    dst = np.zeros(n_edges, dtype=np.int64)
    cum = np.cumsum([params.a, params.b, params.c, params.d])
    cum[-1] = 1.0  # guard the last bucket against rounding
    for _ in range(params.scale):
        draw = rng.random(n_edges)
        quadrant = np.searchsorted(cum, draw, side="right")
        src = (src << 1) | (quadrant >= 2)
        dst = (dst << 1) | (quadrant & 1)
    return from_records(src, dst, n_vertices=1 << params.scale)
