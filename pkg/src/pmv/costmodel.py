"""Expected per-iteration I/O of the placement strategies, in vector elements.

Matrix reads are excluded throughout: every strategy caches sub-matrices
locally after one initial read, so only vector traffic differs between
placements.  Horizontal placement has a closed-form cost, vertical
placement's cost follows a uniform-edge model of sub-result sparsity, and
the hybrid cost refines that with the graph's actual degree histograms.

All power terms are evaluated in log space so vertex counts in the
millions do not underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .partition import DegreeStats


class DensityOutOfRange(ValueError):
    """More matrix elements than an n-by-n matrix can hold."""


@dataclass(frozen=True)
class CostEstimate:
    """Expected vector elements moved per iteration, with its breakdown."""

    strategy: str
    expected_elements: float
    vector_read: float
    intermediate_transfer: float
    vector_write: float
    theta: float | None = None

    @property
    def components(self) -> dict[str, float]:
        return {
            "vectorRead": self.vector_read,
            "intermediateTransfer": self.intermediate_transfer,
            "vectorWrite": self.vector_write,
        }

    def to_json(self) -> dict:
        out = {
            "strategy": self.strategy,
            "expectedElements": self.expected_elements,
            "vectorRead": self.vector_read,
            "intermediateTransfer": self.intermediate_transfer,
            "vectorWrite": self.vector_write,
        }
        if self.theta is not None:
            out["theta"] = "inf" if math.isinf(self.theta) else self.theta
        return out


def cost_horizontal(b: int, vertex_count: int) -> CostEstimate:
    """(b+1)|v|: every worker reads all b sub-vectors, writes its own."""
    _check_b(b)
    n = float(vertex_count)
    return CostEstimate("horizontal", (b + 1) * n, b * n, 0.0, n)


def survival_probability(b: int, vertex_count: int, edge_count: int) -> float:
    """(1 - |M|/|v|^2)^(|v|/b): chance a vertex gets no message from a block."""
    _check_b(b)
    n = vertex_count
    m = edge_count
    if m < 0:
        raise ValueError("edge count must be >= 0")
    if n == 0:
        return 1.0
    density = m / (n * n)
    if density > 1.0:
        raise DensityOutOfRange(f"|M|={m} exceeds |v|^2={n * n}")
    if density == 1.0:
        return 0.0
    return math.exp((n / b) * math.log1p(-density))


def cost_vertical(b: int, vertex_count: int, edge_count: int) -> CostEstimate:
    """2|v| (1 + (b-1)(1 - (1 - |M|/|v|^2)^(|v|/b))) under uniform edges.

    Reads and writes of the vector cost 2|v|; each off-diagonal sub-result
    is written once and read once, and its expected size is the number of
    rows that receive at least one message from the block.
    """
    n = float(vertex_count)
    surv = survival_probability(b, vertex_count, edge_count)
    expected_subresult = (n / b) * (1.0 - surv)
    transfer = 2.0 * b * (b - 1) * expected_subresult
    return CostEstimate("vertical", 2.0 * n + transfer, n, transfer, n)


def selection_predicate(b: int, vertex_count: int, edge_count: int) -> float:
    """The quantity compared against 0.5 when picking a basic strategy."""
    return survival_probability(b, vertex_count, edge_count)


def select_strategy(b: int, vertex_count: int, edge_count: int) -> str:
    """Horizontal iff the survival probability is strictly below 0.5.

    A tie at exactly 0.5 goes to vertical, matching the strict comparison
    of the selection rule.
    """
    return "horizontal" if selection_predicate(b, vertex_count, edge_count) < 0.5 else "vertical"


def cost_hybrid(b: int, vertex_count: int, theta: float, stats: DegreeStats) -> CostEstimate:
    """Degree-aware hybrid cost at threshold theta.

    With P = P_out(theta), the fraction of vertices whose out-degree is
    below theta:

        |v| (P + b (1 - P) + 1)
        + 2 |v| (b - 1) * sum_d (1 - (1 - P/b)^d) p_in(d)

    The first part reads each sparse sub-vector once and every dense
    region b times, plus the result write; the sum estimates sparse
    sub-result sizes from the in-degree distribution.  The sum runs over
    observed histogram keys only, which is identical to summing to |v|.
    """
    _check_b(b)
    n = float(vertex_count)
    if n == 0:
        return CostEstimate("hybrid", 0.0, 0.0, 0.0, 0.0, theta=theta)
    p_out = stats.p_out(theta)
    read = n * p_out + b * n * (1.0 - p_out)
    write = n
    if b == 1:
        return CostEstimate("hybrid", read + write, read, 0.0, write, theta=theta)
    degs, counts = stats.in_items()
    base = 1.0 - p_out / b
    acc = 0.0
    for d, c in zip(degs.tolist(), counts.tolist()):
        if d == 0:
            continue
        if base == 0.0:
            miss = 1.0
        else:
            miss = 1.0 - math.exp(d * math.log(base))
        acc += miss * (c / n)
    transfer = 2.0 * n * (b - 1) * acc
    return CostEstimate("hybrid", read + write + transfer, read, transfer, write, theta=theta)


def default_theta_candidates() -> list[float]:
    """The grid searched by automatic threshold selection: 0, powers of two, inf."""
    return [0.0, 1.0] + [float(2**k) for k in range(1, 21)] + [math.inf]


def choose_theta(
    b: int,
    vertex_count: int,
    stats: DegreeStats,
    candidates: list[float] | None = None,
) -> tuple[float, CostEstimate]:
    """Pick the candidate theta with minimum hybrid cost; ties go low.

    Candidates are scanned in ascending order with a strict improvement
    rule, so equal-cost thresholds resolve to the smallest one.
    """
    if candidates is None:
        candidates = default_theta_candidates()
    if not candidates:
        raise ValueError("candidate list must be non-empty")
    ordered = sorted(candidates)
    best_theta = ordered[0]
    best = cost_hybrid(b, vertex_count, best_theta, stats)
    for theta in ordered[1:]:
        est = cost_hybrid(b, vertex_count, theta, stats)
        if est.expected_elements < best.expected_elements:
            best = est
            best_theta = theta
    return best_theta, best


def theta_sweep(
    b: int,
    vertex_count: int,
    stats: DegreeStats,
    candidates: list[float] | None = None,
) -> list[CostEstimate]:
    """Hybrid cost at every candidate theta, ascending."""
    if candidates is None:
        candidates = default_theta_candidates()
    return [cost_hybrid(b, vertex_count, theta, stats) for theta in sorted(candidates)]


def _check_b(b: int) -> None:
    if b < 1:
        raise ValueError("block count must be >= 1")
