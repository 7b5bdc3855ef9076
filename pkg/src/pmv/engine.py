"""Iterative blocked multiplication under four placement strategies.

One logical worker exists per block index and is multiplexed onto a pool
of execution lanes; lane scheduling is randomized per phase and must never
affect results.  Strategies differ in which blocks a worker owns and in
what crosses the shared store:

* horizontal: worker i owns row stripe M(i, :), reads every sub-vector,
  folds locally, writes its own result block.  No intermediates.
* vertical: worker j owns column stripe M(:, j) and sub-vector j; it
  publishes off-diagonal sub-results, waits on a barrier, then combines
  the sub-results addressed to it.
* selective: evaluates the closed-form density predicate once and runs
  one of the two basic strategies.
* hybrid: per-vertex split by out-degree threshold; sparse regions run
  vertically and dense regions horizontally inside the same iteration.

Within an iteration, float folds always visit column stripes in ascending
order, so runs are reproducible bit-for-bit regardless of scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import costmodel, gimv
from .gimv import EMPTY_PARTIAL, PartialVector, Program, RunContext
from .partition import Partitioned, split_by_degree
from .storage import IterationCounters, MeteredStore, StoreKey, ledger_json


@dataclass
class RunConfig:
    strategy: str = "horizontal"
    algorithm: str = "pagerank"
    max_iterations: int = 20
    epsilon: float = 0.0
    workers: int | None = None  # execution lanes; defaults to the plan's W
    theta: float | None = None  # hybrid override; None falls back to the plan
    theta_auto: bool = False  # hybrid: pick theta by cost-model minimization
    seed: int = 0
    source: int | None = None  # dense vertex id for sssp/rwr
    restart: float = 0.15
    pagerank_init_one: bool = False
    use_threads: bool = False
    record_vectors: bool = False

    def validate(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


@dataclass
class RunReport:
    strategy: str
    algorithm: str
    b: int
    iterations: int
    converged: bool
    changed_counts: list[int]
    l1_deltas: list[float]
    ledger: list[IterationCounters]
    matrix_read: int
    theta: float | None = None
    chosen_strategy: str | None = None
    decision_value: float | None = None
    final_ids: np.ndarray | None = None
    final_values: np.ndarray | None = None
    iteration_vectors: list[np.ndarray] | None = None
    location: str | None = None

    def final_vector(self) -> np.ndarray:
        """Full result vector indexed by dense vertex id."""
        out = np.empty(len(self.final_ids), dtype=np.float64)
        out[self.final_ids] = self.final_values
        return out

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "algorithm": self.algorithm,
            "b": self.b,
            "theta": _theta_json(self.theta),
            "chosenStrategy": self.chosen_strategy,
            "decisionValue": self.decision_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "changedCounts": self.changed_counts,
            "l1Deltas": self.l1_deltas,
            "ledger": ledger_json(self.ledger, self.matrix_read),
            "location": self.location,
        }


def _theta_json(theta):
    if theta is None:
        return None
    return "inf" if math.isinf(theta) else theta


@dataclass
class IterationOutcome:
    iteration: int
    changed: int
    l1: float
    counters: IterationCounters
    vector: np.ndarray | None = None


class _LanePool:
    """Runs one phase of independent worker tasks on W lanes.

    Task order is shuffled every phase; with ``use_threads`` the tasks
    additionally run concurrently.  Either way a phase only returns once
    every task finished, which is the barrier the strategies rely on.
    """

    def __init__(self, lanes: int, rng: np.random.Generator, use_threads: bool):
        self.lanes = max(1, lanes)
        self.rng = rng
        self._pool = (
            ThreadPoolExecutor(max_workers=self.lanes)
            if use_threads and self.lanes > 1
            else None
        )

    def run_phase(self, tasks: list) -> None:
        order = self.rng.permutation(len(tasks))
        if self._pool is None:
            for k in order:
                tasks[k]()
            return
        futures = [self._pool.submit(tasks[k]) for k in order]
        for f in futures:
            f.result()

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)


@dataclass
class _PreparedBlock:
    """A matrix block preprocessed once per run.

    Matrix values are derived from edge weights via the program's rule,
    row ids are compacted for scatter-reduction, and column ids are
    resolved to positions inside the owning vector block.
    """

    uniq_rows: np.ndarray
    row_inverse: np.ndarray
    col_pos: np.ndarray
    m_vals: np.ndarray
    count: int


_EMPTY_PREPARED = _PreparedBlock(
    np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int64),
    np.empty(0, np.float64), 0,
)


def _prepare(block, owner_ids: np.ndarray, program: Program, out_deg: np.ndarray) -> _PreparedBlock:
    if block.triple_count == 0:
        return _EMPTY_PREPARED
    if program.matrix_value_vec is not None:
        m_vals = program.matrix_value_vec(block.vals, out_deg[block.cols])
    else:
        m_vals = np.array(
            [
                program.matrix_value(float(w), int(out_deg[q]))
                for w, q in zip(block.vals, block.cols)
            ],
            dtype=np.float64,
        )
    uniq, inverse = np.unique(block.rows, return_inverse=True)
    pos = np.searchsorted(owner_ids, block.cols)
    bad = (pos >= len(owner_ids)) | (
        owner_ids[np.minimum(pos, len(owner_ids) - 1)] != block.cols
    )
    if bad.any():
        raise gimv.MissingVectorEntry(
            f"vertex {int(block.cols[bad][0])} missing from vector block "
            f"{block.col_block}"
        )
    return _PreparedBlock(uniq, inverse.astype(np.int64), pos, m_vals, block.triple_count)


def _multiply(pb: _PreparedBlock, v_values: np.ndarray, program: Program) -> PartialVector:
    if pb.count == 0:
        return EMPTY_PARTIAL
    x = gimv.apply_combine2(program, pb.m_vals, v_values[pb.col_pos])
    if program.reduce_kind == "sum":
        reduced = np.bincount(pb.row_inverse, weights=x, minlength=len(pb.uniq_rows))
    elif program.reduce_kind == "min":
        reduced = np.full(len(pb.uniq_rows), np.inf, dtype=np.float64)
        np.minimum.at(reduced, pb.row_inverse, x)
    else:
        reduced = np.full(
            len(pb.uniq_rows), program.combine_all_identity, dtype=np.float64
        )
        for k, val in zip(pb.row_inverse.tolist(), x.tolist()):
            reduced[k] = program.combine_all(reduced[k], val)
    return PartialVector(pb.uniq_rows, reduced)


def _l1_delta(old: np.ndarray, new: np.ndarray) -> float:
    with np.errstate(invalid="ignore"):
        diff = np.abs(new - old)
    return float(np.nansum(diff))


def _assemble(store: MeteredStore, b: int, regions: tuple[str, ...], iteration: int, n: int):
    ids_out = np.empty(n, dtype=np.int64)
    vals_out = np.empty(n, dtype=np.float64)
    filled = 0
    for i in range(b):
        for region in regions:
            ids, vals = store.peek(StoreKey.vector(i, region, iteration))
            ids_out[filled : filled + len(ids)] = ids
            vals_out[filled : filled + len(ids)] = vals
            filled += len(ids)
    order = np.argsort(ids_out[:filled])
    return ids_out[order], vals_out[order]


def run_until_convergence(outcomes, program: Program, config: RunConfig):
    """Consume per-iteration outcomes until the program's rule fires.

    Stops at the first iteration where the rule holds, or at the iteration
    cap.  ``no_change`` fires on a zero global changed count, ``l1_norm``
    when the summed absolute change drops strictly below epsilon, and
    ``fixed`` at the cap itself.
    """
    ledger: list[IterationCounters] = []
    changed_counts: list[int] = []
    l1_deltas: list[float] = []
    vectors: list[np.ndarray] = []
    converged = False
    iterations = 0
    for out in outcomes:
        iterations = out.iteration
        ledger.append(out.counters)
        changed_counts.append(out.changed)
        l1_deltas.append(out.l1)
        if out.vector is not None:
            vectors.append(out.vector)
        if program.convergence == "no_change" and out.changed == 0:
            converged = True
        elif program.convergence == "l1_norm" and out.l1 < config.epsilon:
            converged = True
        elif program.convergence == "fixed" and iterations >= config.max_iterations:
            converged = True
        if converged or iterations >= config.max_iterations:
            break
    return iterations, converged, changed_counts, l1_deltas, ledger, vectors


def _finish_report(
    strategy: str,
    part: Partitioned,
    program: Program,
    config: RunConfig,
    store: MeteredStore,
    regions: tuple[str, ...],
    results,
    theta: float | None = None,
) -> RunReport:
    iterations, converged, changed_counts, l1_deltas, ledger, vectors = results
    final_ids, final_values = _assemble(
        store, part.plan.b, regions, iterations, part.plan.vertex_count
    )
    return RunReport(
        strategy=strategy,
        algorithm=program.name,
        b=part.plan.b,
        iterations=iterations,
        converged=converged,
        changed_counts=changed_counts,
        l1_deltas=l1_deltas,
        ledger=ledger,
        matrix_read=store.ledger.cumulative.matrix_read,
        theta=theta,
        final_ids=final_ids,
        final_values=final_values,
        iteration_vectors=vectors if config.record_vectors else None,
    )


def _make_pool(part: Partitioned, config: RunConfig) -> _LanePool:
    lanes = config.workers or part.plan.workers or part.plan.b
    rng = np.random.default_rng(config.seed)
    return _LanePool(lanes, rng, config.use_threads)


def run_horizontal(
    part: Partitioned, program: Program, config: RunConfig, store: MeteredStore | None = None
) -> RunReport:
    """Row-stripe execution: all reads, no worker-to-worker traffic."""
    config.validate()
    store = store if store is not None else MeteredStore()
    b, n = part.plan.b, part.plan.vertex_count
    ctx = RunContext(n, config.source, config.pagerank_init_one)
    pool = _make_pool(part, config)
    region = "d"

    vec_ids = {i: part.merged_vector(i).ids for i in range(b)}
    store.begin_iteration(0)
    for i in range(b):
        store.put(
            StoreKey.vector(i, region, 0),
            vec_ids[i],
            gimv.initial_vector(program, vec_ids[i], ctx),
        )
    prepared = {}
    for i in range(b):
        stripe_triples = 0
        for j in range(b):
            blk = part.merged_block(i, j)
            prepared[(i, j)] = _prepare(blk, vec_ids[j], program, part.out_degrees)
            stripe_triples += blk.triple_count
        store.count_matrix_read(stripe_triples)

    def outcomes():
        t = 0
        while True:
            t += 1
            store.begin_iteration(t)
            changed = [0] * b
            l1 = [0.0] * b

            def make_task(i, t=t):
                def task():
                    partials = []
                    old = None
                    for j in range(b):
                        _, vals_j = store.get(StoreKey.vector(j, region, t - 1))
                        if j == i:
                            old = vals_j
                        pb = prepared[(i, j)]
                        if pb.count:
                            partials.append(_multiply(pb, vals_j, program))
                    reduced = gimv.combine_partials(partials, program)
                    full = gimv.scatter_reduced(vec_ids[i], reduced, program)
                    new, mask = gimv.apply_assign(program, old, full, vec_ids[i])
                    store.put(StoreKey.vector(i, region, t), vec_ids[i], new)
                    changed[i] = int(mask.sum())
                    l1[i] = _l1_delta(old, new)

                return task

            pool.run_phase([make_task(i) for i in range(b)])
            counters = store.snapshot_ledger(t)
            vec = None
            if config.record_vectors:
                _, vals = _assemble(store, b, (region,), t, n)
                vec = vals
            store.evict_iteration(t - 1)
            yield IterationOutcome(t, sum(changed), sum(l1), counters, vec)

    try:
        results = run_until_convergence(outcomes(), program, config)
        return _finish_report("horizontal", part, program, config, store, (region,), results)
    finally:
        pool.close()


def run_vertical(
    part: Partitioned, program: Program, config: RunConfig, store: MeteredStore | None = None
) -> RunReport:
    """Column-stripe execution with a barrier between the two phases."""
    config.validate()
    store = store if store is not None else MeteredStore()
    b, n = part.plan.b, part.plan.vertex_count
    ctx = RunContext(n, config.source, config.pagerank_init_one)
    pool = _make_pool(part, config)
    region = "s"

    vec_ids = {i: part.merged_vector(i).ids for i in range(b)}
    store.begin_iteration(0)
    for i in range(b):
        store.put(
            StoreKey.vector(i, region, 0),
            vec_ids[i],
            gimv.initial_vector(program, vec_ids[i], ctx),
        )
    prepared = {}
    for j in range(b):
        stripe_triples = 0
        for i in range(b):
            blk = part.merged_block(i, j)
            prepared[(i, j)] = _prepare(blk, vec_ids[j], program, part.out_degrees)
            stripe_triples += blk.triple_count
        store.count_matrix_read(stripe_triples)

    worker_state: dict[int, tuple[np.ndarray, PartialVector]] = {}

    def outcomes():
        t = 0
        while True:
            t += 1
            store.begin_iteration(t)
            changed = [0] * b
            l1 = [0.0] * b

            def make_phase1(j, t=t):
                def task():
                    _, vals_j = store.get(StoreKey.vector(j, region, t - 1))
                    diag = EMPTY_PARTIAL
                    for i in range(b):
                        partial = _multiply(prepared[(i, j)], vals_j, program)
                        if i == j:
                            diag = partial
                        else:
                            store.put(
                                StoreKey.intermediate(i, j, t), partial.ids, partial.values
                            )
                    worker_state[j] = (vals_j, diag)

                return task

            def make_phase2(j, t=t):
                def task():
                    old, diag = worker_state[j]
                    parts = []
                    for i in range(b):
                        if i == j:
                            parts.append(diag)
                        else:
                            ids, vals = store.get(StoreKey.intermediate(j, i, t))
                            parts.append(PartialVector(ids, vals))
                    reduced = gimv.combine_partials(parts, program)
                    full = gimv.scatter_reduced(vec_ids[j], reduced, program)
                    new, mask = gimv.apply_assign(program, old, full, vec_ids[j])
                    store.put(StoreKey.vector(j, region, t), vec_ids[j], new)
                    changed[j] = int(mask.sum())
                    l1[j] = _l1_delta(old, new)

                return task

            pool.run_phase([make_phase1(j) for j in range(b)])
            pool.run_phase([make_phase2(j) for j in range(b)])
            counters = store.snapshot_ledger(t)
            vec = None
            if config.record_vectors:
                ids, vals = _assemble(store, b, (region,), t, n)
                vec = vals
            store.evict_intermediates(t)
            store.evict_iteration(t - 1)
            yield IterationOutcome(t, sum(changed), sum(l1), counters, vec)

    try:
        results = run_until_convergence(outcomes(), program, config)
        return _finish_report("vertical", part, program, config, store, (region,), results)
    finally:
        pool.close()


def run_selective(
    part: Partitioned, program: Program, config: RunConfig, store: MeteredStore | None = None
) -> RunReport:
    """Evaluate the density predicate once, then run the chosen strategy."""
    b = part.plan.b
    n = part.plan.vertex_count
    m = part.plan.edge_count
    predicate = costmodel.selection_predicate(b, n, m)
    choice = costmodel.select_strategy(b, n, m)
    runner = run_horizontal if choice == "horizontal" else run_vertical
    report = runner(part, program, config, store)
    report.strategy = "selective"
    report.chosen_strategy = choice
    report.decision_value = predicate
    return report


def run_hybrid(
    part: Partitioned, program: Program, config: RunConfig, store: MeteredStore | None = None
) -> RunReport:
    """Vertical pass over sparse regions, horizontal over dense, per iteration."""
    config.validate()
    store = store if store is not None else MeteredStore()
    b, n = part.plan.b, part.plan.vertex_count
    ctx = RunContext(n, config.source, config.pagerank_init_one)
    pool = _make_pool(part, config)

    if config.theta_auto:
        theta, _ = costmodel.choose_theta(b, n, part.stats)
    elif config.theta is not None:
        theta = config.theta
    else:
        theta = part.plan.theta

    if theta == part.plan.theta:
        sblocks, svecs = part.blocks, part.vectors
    else:
        whole_blocks = {(i, j): part.merged_block(i, j) for i in range(b) for j in range(b)}
        whole_vecs = {i: part.merged_vector(i) for i in range(b)}
        sblocks, svecs = split_by_degree(whole_blocks, whole_vecs, theta, part.out_degrees)

    s_ids = {i: svecs[i]["s"].ids for i in range(b)}
    d_ids = {i: svecs[i]["d"].ids for i in range(b)}
    union_ids = {}
    pos_s = {}
    pos_d = {}
    for i in range(b):
        union = np.union1d(s_ids[i], d_ids[i])
        union_ids[i] = union
        pos_s[i] = np.searchsorted(union, s_ids[i])
        pos_d[i] = np.searchsorted(union, d_ids[i])

    store.begin_iteration(0)
    for i in range(b):
        store.put(
            StoreKey.vector(i, "s", 0), s_ids[i], gimv.initial_vector(program, s_ids[i], ctx)
        )
        store.put(
            StoreKey.vector(i, "d", 0), d_ids[i], gimv.initial_vector(program, d_ids[i], ctx)
        )

    prepared_s = {}
    prepared_d = {}
    for j in range(b):
        worker_triples = 0
        for i in range(b):
            blk_s = sblocks[(i, j)]["s"]
            prepared_s[(i, j)] = _prepare(blk_s, s_ids[j], program, part.out_degrees)
            worker_triples += blk_s.triple_count
            blk_d = sblocks[(j, i)]["d"]
            prepared_d[(j, i)] = _prepare(blk_d, d_ids[i], program, part.out_degrees)
            worker_triples += blk_d.triple_count
        store.count_matrix_read(worker_triples)

    worker_state: dict[int, tuple[np.ndarray, PartialVector]] = {}

    def outcomes():
        t = 0
        while True:
            t += 1
            store.begin_iteration(t)
            changed = [0] * b
            l1 = [0.0] * b

            def make_phase1(j, t=t):
                def task():
                    _, vals_s = store.get(StoreKey.vector(j, "s", t - 1))
                    diag = EMPTY_PARTIAL
                    for i in range(b):
                        partial = _multiply(prepared_s[(i, j)], vals_s, program)
                        if i == j:
                            diag = partial
                        else:
                            store.put(
                                StoreKey.intermediate(i, j, t), partial.ids, partial.values
                            )
                    worker_state[j] = (vals_s, diag)

                return task

            def make_phase2(j, t=t):
                def task():
                    old_s, diag = worker_state[j]
                    parts = []
                    for i in range(b):
                        if i == j:
                            parts.append(diag)
                        else:
                            ids, vals = store.get(StoreKey.intermediate(j, i, t))
                            parts.append(PartialVector(ids, vals))
                    old_d = None
                    for i in range(b):
                        _, vals_d = store.get(StoreKey.vector(i, "d", t - 1))
                        if i == j:
                            old_d = vals_d
                        pb = prepared_d[(j, i)]
                        if pb.count:
                            parts.append(_multiply(pb, vals_d, program))
                    reduced = gimv.combine_partials(parts, program)
                    union = union_ids[j]
                    old = np.empty(len(union), dtype=np.float64)
                    old[pos_s[j]] = old_s
                    old[pos_d[j]] = old_d
                    full = gimv.scatter_reduced(union, reduced, program)
                    new, mask = gimv.apply_assign(program, old, full, union)
                    store.put(StoreKey.vector(j, "s", t), s_ids[j], new[pos_s[j]])
                    store.put(StoreKey.vector(j, "d", t), d_ids[j], new[pos_d[j]])
                    changed[j] = int(mask.sum())
                    l1[j] = _l1_delta(old, new)

                return task

            pool.run_phase([make_phase1(j) for j in range(b)])
            pool.run_phase([make_phase2(j) for j in range(b)])
            counters = store.snapshot_ledger(t)
            vec = None
            if config.record_vectors:
                ids, vals = _assemble(store, b, ("s", "d"), t, n)
                vec = vals
            store.evict_intermediates(t)
            store.evict_iteration(t - 1)
            yield IterationOutcome(t, sum(changed), sum(l1), counters, vec)

    try:
        results = run_until_convergence(outcomes(), program, config)
        return _finish_report(
            "hybrid", part, program, config, store, ("s", "d"), results, theta=theta
        )
    finally:
        pool.close()


RUNNERS = {
    "horizontal": run_horizontal,
    "vertical": run_vertical,
    "selective": run_selective,
    "hybrid": run_hybrid,
}


def run(
    part: Partitioned, program: Program, config: RunConfig, store: MeteredStore | None = None
) -> RunReport:
    if config.strategy not in RUNNERS:
        raise ValueError(
            f"unknown strategy {config.strategy!r}; choose from {sorted(RUNNERS)}"
        )
    return RUNNERS[config.strategy](part, program, config, store)
