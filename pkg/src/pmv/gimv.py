"""Generalized iterative matrix-vector multiplication primitives.

A graph algorithm is expressed as three operations: ``combine2`` turns a
matrix element and a vector element into a message, ``combine_all``
reduces the messages arriving at one vertex, and ``assign`` merges the
reduced value into the vertex's current value.  One iteration computes,
for every vertex i,

    v'[i] = assign(v[i], fold(combine2(m[i, q], v[q]) for q in in(i)))

where the fold starts from the reduce identity, so vertices with no
incoming messages are still assigned a well-defined value.

The built-in catalog covers PageRank, random walk with restart, single
source shortest paths, and connected components.  Each program carries
both the scalar operations (the definitional semantics, used by the
reference oracle) and vectorized kernels the blocked engine dispatches on.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .edgelist import EdgeList, dedupe

# |new - old| below this does not count as a change for real-valued programs.
FLOAT_CHANGE_EPS = 1e-12

PAGERANK_RESTART = 0.15  # fixed damping constants; only RWR exposes its own


class ColumnMismatch(ValueError):
    """Matrix block multiplied against a vector block of another index."""


class MissingVectorEntry(KeyError):
    """A triple references a source vertex absent from the vector block."""


class UnknownVertex(KeyError):
    """A reduced value targets a vertex outside the vector block."""


@dataclass(frozen=True)
class RunContext:
    """Per-run facts the initial-vector rule may depend on."""

    vertex_count: int
    source: int | None = None
    pagerank_init_one: bool = False


@dataclass(frozen=True)
class MessageSet:
    """Multiset of (destination vertex, value) pairs, one per matrix triple."""

    rows: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class PartialVector:
    """One reduced value per distinct destination vertex, sorted by id."""

    ids: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.ids.tolist(), self.values.tolist()))


EMPTY_PARTIAL = PartialVector(np.empty(0, np.int64), np.empty(0, np.float64))


@dataclass(frozen=True)
class Program:
    """One graph algorithm in generalized matrix-vector form.

    Scalar fields define the semantics; the ``*_kind`` tags and vectorized
    callables let block kernels run on whole arrays.  ``assign`` receives
    the vertex id as a third argument because the random-walk-with-restart
    update is conditioned on the source vertex.
    """

    name: str
    value_kind: str  # "real" | "label"
    combine2: Callable[[float, float], float]
    combine_all_identity: float
    combine_all: Callable[[float, float], float]
    assign: Callable[[float, float, int], tuple[float, bool]]
    initial_value: Callable[[int, RunContext], float]
    matrix_value: Callable[[float, int], float]  # (edge weight, out-degree of source)
    convergence: str  # "l1_norm" | "no_change" | "fixed"
    combine2_kind: str | None = None  # "mul" | "add" | "src"
    reduce_kind: str | None = None  # "sum" | "min"
    assign_vec: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray] | None = None
    initial_vec: Callable[[np.ndarray, RunContext], np.ndarray] | None = None
    matrix_value_vec: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def value_changed(self, old: float, new: float) -> bool:
        if self.value_kind == "label":
            return new != old
        diff = abs(new - old)
        # inf - inf is nan, which correctly reads as "no change"
        return bool(diff > FLOAT_CHANGE_EPS)

    def changed_mask(self, old: np.ndarray, new: np.ndarray) -> np.ndarray:
        if self.value_kind == "label":
            return new != old
        with np.errstate(invalid="ignore"):
            diff = np.abs(new - old)
        return diff > FLOAT_CHANGE_EPS


# ---------------------------------------------------------------------------
# Built-in algorithm catalog


def _real_assign_factory(update: Callable[[float, float, int], float]) -> Callable:
    def assign(old: float, reduced: float, vertex: int = -1):
        new = update(old, reduced, vertex)
        diff = abs(new - old)
        return new, bool(diff > FLOAT_CHANGE_EPS)

    return assign


def pagerank(init_one: bool = False) -> Program:
    def initial(vid: int, ctx: RunContext) -> float:
        return 1.0 if ctx.pagerank_init_one else 1.0 / ctx.vertex_count

    def initial_vec(ids: np.ndarray, ctx: RunContext) -> np.ndarray:
        fill = 1.0 if ctx.pagerank_init_one else 1.0 / ctx.vertex_count
        return np.full(len(ids), fill, dtype=np.float64)

    return Program(
        name="pagerank",
        value_kind="real",
        combine2=lambda m, v: m * v,
        combine_all_identity=0.0,
        combine_all=lambda a, b: a + b,
        assign=_real_assign_factory(lambda old, r, _vid: PAGERANK_RESTART + 0.85 * r),
        initial_value=initial,
        matrix_value=lambda w, out_deg: 1.0 / out_deg,
        convergence="l1_norm",
        combine2_kind="mul",
        reduce_kind="sum",
        assign_vec=lambda old, r, ids: PAGERANK_RESTART + 0.85 * r,
        initial_vec=initial_vec,
        matrix_value_vec=lambda w, out_deg: 1.0 / out_deg,
    )


def rwr(source: int, restart: float = 0.15) -> Program:
    if not 0.0 <= restart <= 1.0:
        raise ValueError("restart probability must be in [0, 1]")

    def update(old: float, r: float, vid: int) -> float:
        if vid == source:
            return restart + (1.0 - restart) * r
        return (1.0 - restart) * r

    def assign_vec(old: np.ndarray, r: np.ndarray, ids: np.ndarray) -> np.ndarray:
        new = (1.0 - restart) * r
        new[ids == source] += restart
        return new

    def initial(vid: int, ctx: RunContext) -> float:
        return 1.0 if ctx.pagerank_init_one else 1.0 / ctx.vertex_count

    def initial_vec(ids: np.ndarray, ctx: RunContext) -> np.ndarray:
        fill = 1.0 if ctx.pagerank_init_one else 1.0 / ctx.vertex_count
        return np.full(len(ids), fill, dtype=np.float64)

    return Program(
        name="rwr",
        value_kind="real",
        combine2=lambda m, v: m * v,
        combine_all_identity=0.0,
        combine_all=lambda a, b: a + b,
        assign=_real_assign_factory(update),
        initial_value=initial,
        matrix_value=lambda w, out_deg: 1.0 / out_deg,
        convergence="l1_norm",
        combine2_kind="mul",
        reduce_kind="sum",
        assign_vec=assign_vec,
        initial_vec=initial_vec,
        matrix_value_vec=lambda w, out_deg: 1.0 / out_deg,
    )


def sssp(source: int) -> Program:
    def assign(old: float, r: float, vertex: int = -1):
        new = min(old, r)
        diff = abs(new - old)
        return new, bool(diff > FLOAT_CHANGE_EPS)

    def initial(vid: int, ctx: RunContext) -> float:
        return 0.0 if vid == ctx.source else np.inf

    def initial_vec(ids: np.ndarray, ctx: RunContext) -> np.ndarray:
        out = np.full(len(ids), np.inf, dtype=np.float64)
        out[ids == ctx.source] = 0.0
        return out

    return Program(
        name="sssp",
        value_kind="real",
        combine2=lambda m, v: m + v,
        combine_all_identity=np.inf,
        combine_all=min,
        assign=assign,
        initial_value=initial,
        matrix_value=lambda w, out_deg: w,
        convergence="no_change",
        combine2_kind="add",
        reduce_kind="min",
        assign_vec=lambda old, r, ids: np.minimum(old, r),
        initial_vec=initial_vec,
        matrix_value_vec=lambda w, out_deg: w,
    )


def cc() -> Program:
    def assign(old: float, r: float, vertex: int = -1):
        new = min(old, r)
        return new, new != old

    return Program(
        name="cc",
        value_kind="label",
        combine2=lambda m, v: v,
        combine_all_identity=np.inf,
        combine_all=min,
        assign=assign,
        initial_value=lambda vid, ctx: float(vid),
        matrix_value=lambda w, out_deg: 1.0,
        convergence="no_change",
        combine2_kind="src",
        reduce_kind="min",
        assign_vec=lambda old, r, ids: np.minimum(old, r),
        initial_vec=lambda ids, ctx: ids.astype(np.float64),
        matrix_value_vec=lambda w, out_deg: np.ones(len(w), dtype=np.float64),
    )


CATALOG = {"pagerank": pagerank, "rwr": rwr, "sssp": sssp, "cc": cc}


def build_program(
    name: str,
    source: int | None = None,
    restart: float = 0.15,
    pagerank_init_one: bool = False,
) -> Program:
    """Instantiate a catalog program by name.

    ``source`` is the dense vertex id for sssp/rwr; PageRank's constants
    are fixed while rwr takes an explicit restart probability.
    """
    if name == "pagerank":
        return pagerank(init_one=pagerank_init_one)
    if name == "rwr":
        if source is None:
            raise ValueError("rwr requires a source vertex")
        return rwr(source, restart=restart)
    if name == "sssp":
        if source is None:
            raise ValueError("sssp requires a source vertex")
        return sssp(source)
    if name == "cc":
        return cc()
    raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(CATALOG)}")


# ---------------------------------------------------------------------------
# Block-level operator forms


def combine2_block(m_block, v_block, program: Program) -> MessageSet:
    """Emit one (destination, combine2(m, v)) message per triple of a block.

    The matrix block's column index must equal the vector block's index,
    and every source vertex must have an entry in the vector block.
    """
    if m_block.col_block != v_block.block_index:
        raise ColumnMismatch(
            f"matrix block column {m_block.col_block} does not match "
            f"vector block {v_block.block_index}"
        )
    rows = np.asarray(m_block.rows, dtype=np.int64)
    cols = np.asarray(m_block.cols, dtype=np.int64)
    vals = np.asarray(m_block.vals, dtype=np.float64)
    if len(rows) == 0:
        return MessageSet(np.empty(0, np.int64), np.empty(0, np.float64))
    ids = np.asarray(v_block.ids, dtype=np.int64)
    pos = np.searchsorted(ids, cols)
    bad = (pos >= len(ids)) | (ids[np.minimum(pos, len(ids) - 1)] != cols)
    if bad.any():
        missing = int(cols[bad][0])
        raise MissingVectorEntry(f"vertex {missing} has no entry in vector block")
    vv = np.asarray(v_block.values, dtype=np.float64)[pos]
    messages = apply_combine2(program, vals, vv)
    return MessageSet(rows, messages)


def apply_combine2(program: Program, m: np.ndarray, v: np.ndarray) -> np.ndarray:
    if program.combine2_kind == "mul":
        return m * v
    if program.combine2_kind == "add":
        return m + v
    if program.combine2_kind == "src":
        return v.copy()
    return np.array(
        [program.combine2(float(a), float(b)) for a, b in zip(m, v)], dtype=np.float64
    )


def reduce_messages(
    program: Program, rows: np.ndarray, values: np.ndarray
) -> PartialVector:
    """Scatter-reduce messages per destination with combine_all.

    Accumulation visits messages in array order, so callers control float
    summation order by how they order the input.
    """
    if len(rows) == 0:
        return EMPTY_PARTIAL
    uniq, inverse = np.unique(rows, return_inverse=True)
    if program.reduce_kind == "sum":
        reduced = np.bincount(inverse, weights=values, minlength=len(uniq))
    elif program.reduce_kind == "min":
        reduced = np.full(len(uniq), np.inf, dtype=np.float64)
        np.minimum.at(reduced, inverse, values)
    else:
        reduced = np.full(len(uniq), program.combine_all_identity, dtype=np.float64)
        for k, x in zip(inverse.tolist(), values.tolist()):
            reduced[k] = program.combine_all(reduced[k], x)
    return PartialVector(uniq, reduced)


def combine_all_block(messages: MessageSet, program: Program) -> PartialVector:
    """Reduce a message multiset to one value per distinct destination.

    Destinations with zero messages are absent from the result; the fold
    starts from the reduce identity.
    """
    return reduce_messages(program, messages.rows, messages.values)


def combine_partials(parts: list[PartialVector], program: Program) -> PartialVector:
    """Fold several partial vectors into one, in list order per vertex."""
    parts = [p for p in parts if len(p)]
    if not parts:
        return EMPTY_PARTIAL
    if len(parts) == 1:
        return parts[0]
    ids = np.concatenate([p.ids for p in parts])
    values = np.concatenate([p.values for p in parts])
    return reduce_messages(program, ids, values)


def assign_block(v_block, reduced: PartialVector, program: Program):
    """Apply assign over a whole vector block; returns (block', changed count).

    Vertices missing from ``reduced`` are assigned the reduce identity, so
    min-based programs keep their old value and sum-based programs see 0.
    """
    ids = np.asarray(v_block.ids, dtype=np.int64)
    old = np.asarray(v_block.values, dtype=np.float64)
    full = scatter_reduced(ids, reduced, program)
    new, changed = apply_assign(program, old, full, ids)
    return replace(v_block, values=new), int(changed.sum())


def scatter_reduced(
    ids: np.ndarray, reduced: PartialVector, program: Program
) -> np.ndarray:
    """Expand a sparse partial onto a block's id set, filling the identity."""
    full = np.full(len(ids), program.combine_all_identity, dtype=np.float64)
    if len(reduced):
        pos = np.searchsorted(ids, reduced.ids)
        bad = (pos >= len(ids)) | (ids[np.minimum(pos, len(ids) - 1)] != reduced.ids)
        if bad.any():
            raise UnknownVertex(
                f"reduced value for vertex {int(reduced.ids[bad][0])} "
                "outside the vector block"
            )
        full[pos] = reduced.values
    return full


def apply_assign(
    program: Program, old: np.ndarray, reduced_full: np.ndarray, ids: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    if program.assign_vec is not None:
        new = program.assign_vec(old, reduced_full, ids)
    else:
        new = np.array(
            [
                program.assign(float(o), float(r), int(i))[0]
                for o, r, i in zip(old, reduced_full, ids)
            ],
            dtype=np.float64,
        )
    return new, program.changed_mask(old, new)


# ---------------------------------------------------------------------------
# Dense single-worker reference oracle


def reference_iterations(edges: EdgeList, v: np.ndarray, program: Program):
    """Yield (vector, changed count) per iteration, evaluated definitionally.

    This is the correctness oracle for every placement strategy: a serial
    pure-Python walk over the deduplicated edge list, with messages folded
    per destination in ascending (destination, source) order.
    """
    el = dedupe(edges)
    n = el.n_vertices
    out_deg = np.bincount(el.src, minlength=n)
    order = np.lexsort((el.src, el.dst))
    triples = [
        (int(p), int(q), program.matrix_value(float(w), int(out_deg[q])))
        for p, q, w in zip(el.dst[order], el.src[order], el.weight[order])
    ]
    identity = program.combine_all_identity
    current = [float(x) for x in v]
    while True:
        reduced: dict[int, float] = {}
        for p, q, m in triples:
            x = program.combine2(m, current[q])
            reduced[p] = program.combine_all(reduced.get(p, identity), x)
        nxt = []
        changed_count = 0
        for i in range(n):
            new, changed = program.assign(current[i], reduced.get(i, identity), i)
            nxt.append(new)
            changed_count += bool(changed)
        current = nxt
        yield np.array(current, dtype=np.float64), changed_count


def reference_multiply(
    edges: EdgeList, v: np.ndarray, program: Program, iterations: int = 1
) -> np.ndarray:
    """Exact serial evaluation of ``iterations`` generalized multiplications."""
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    result = np.asarray(v, dtype=np.float64)
    stream = reference_iterations(edges, result, program)
    for _ in range(iterations):
        result, _ = next(stream)
    return result


def initial_vector(program: Program, ids: np.ndarray, ctx: RunContext) -> np.ndarray:
    if program.initial_vec is not None:
        return program.initial_vec(np.asarray(ids, dtype=np.int64), ctx)
    return np.array([program.initial_value(int(i), ctx) for i in ids], dtype=np.float64)
