"""Partitioned generalized matrix-vector multiplication for graph mining.

The package pre-partitions a graph into a grid of matrix blocks once,
then iterates graph algorithms (PageRank, random walk with restart,
shortest paths, connected components) under four block placement
strategies, metering every vector element moved through a simulated
shared store and predicting that traffic with a closed-form cost model.
"""

__version__ = "0.1.0"
