"""One-time pre-partitioning of a graph into a b-by-b grid of blocks.

The vertex universe is split into ``b`` partitions by a deterministic
function psi; matrix element (p, q) lands in block (psi(p), psi(q)) where
q is the edge source and p the destination, and the vector splits into one
sub-vector per partition.  Every block and sub-vector is further divided
into a sparse and a dense region by comparing the source vertex's
out-degree against a threshold theta.  The result is written once to a
directory and reused, unchanged, by every iteration of every strategy.

On-disk layout (all binary records little-endian):

    plan.json                  partition parameters and summary counts
    stats.json                 in/out degree histograms
    idmap.bin                  u64 original id per dense vertex id
    blocks/M_<i>_<j>_<s|d>.bin matrix triples (u64 p, u64 q, f64 m)
    vectors/v_<i>_<s|d>.bin    vector entries (u64 p, f64 v)
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .edgelist import EdgeList, dedupe

TRIPLE_DTYPE = np.dtype([("p", "<u8"), ("q", "<u8"), ("m", "<f8")])
VECTOR_DTYPE = np.dtype([("p", "<u8"), ("v", "<f8")])


class EmptyGraph(ValueError):
    """Partitioning input with neither edges nor vertices."""


def _splitmix64(ids: np.ndarray) -> np.ndarray:
    z = ids.astype(np.uint64) + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class PsiSpec:
    """Deterministic vertex partitioning function.

    ``hash`` scatters ids with a 64-bit mix; ``range`` assigns contiguous
    chunks of ``chunk`` ids per block, which reproduces hand-drawn example
    partitions exactly.
    """

    kind: str  # "hash" | "range"
    chunk: int | None = None

    def assign(self, ids: np.ndarray, b: int) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if b == 1:
            return np.zeros(len(ids), dtype=np.int64)
        if self.kind == "hash":
            return (_splitmix64(ids) % np.uint64(b)).astype(np.int64)
        if self.kind == "range":
            if not self.chunk or self.chunk < 1:
                raise ValueError("range psi requires a positive chunk size")
            return np.minimum(ids // self.chunk, b - 1).astype(np.int64)
        raise ValueError(f"unknown psi kind {self.kind!r}")

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "range":
            out["chunk"] = self.chunk
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "PsiSpec":
        return cls(kind=obj["kind"], chunk=obj.get("chunk"))


def range_psi(vertex_count: int, b: int) -> PsiSpec:
    return PsiSpec(kind="range", chunk=max(1, math.ceil(vertex_count / b)))


@dataclass
class DegreeStats:
    """Exact degree histograms over the dense vertex universe.

    ``in_hist``/``out_hist`` map degree -> vertex count and always include
    degree 0, so the counts sum to the vertex count.
    """

    in_hist: dict[int, int]
    out_hist: dict[int, int]
    vertex_count: int
    edge_count: int
    _out_sorted: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    _out_cum: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        degs = np.array(sorted(self.out_hist), dtype=np.int64)
        counts = np.array([self.out_hist[int(d)] for d in degs], dtype=np.int64)
        object.__setattr__(self, "_out_sorted", degs)
        object.__setattr__(self, "_out_cum", np.cumsum(counts))

    def p_in(self, d: int) -> float:
        if self.vertex_count == 0:
            return 0.0
        return self.in_hist.get(d, 0) / self.vertex_count

    def p_out(self, theta: float) -> float:
        """Fraction of vertices with out-degree strictly below theta."""
        if self.vertex_count == 0:
            return 0.0
        idx = int(np.searchsorted(self._out_sorted, theta, side="left"))
        if idx == 0:
            return 0.0
        return float(self._out_cum[idx - 1]) / self.vertex_count

    def in_items(self) -> tuple[np.ndarray, np.ndarray]:
        degs = np.array(sorted(self.in_hist), dtype=np.int64)
        counts = np.array([self.in_hist[int(d)] for d in degs], dtype=np.float64)
        return degs, counts

    def to_json(self) -> dict:
        return {
            "inHist": [[int(d), int(self.in_hist[d])] for d in sorted(self.in_hist)],
            "outHist": [[int(d), int(self.out_hist[d])] for d in sorted(self.out_hist)],
            "vertexCount": self.vertex_count,
            "edgeCount": self.edge_count,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DegreeStats":
        return cls(
            in_hist={int(d): int(c) for d, c in obj["inHist"]},
            out_hist={int(d): int(c) for d, c in obj["outHist"]},
            vertex_count=int(obj["vertexCount"]),
            edge_count=int(obj["edgeCount"]),
        )


@dataclass
class MatrixBlock:
    """Triples (p, q, m) with psi(p) = row_block and psi(q) = col_block.

    ``m`` holds the raw edge weight; programs derive their matrix value
    from it at run time.  Triples are sorted by (p, q) and hold no
    duplicates.  Region "d" means the source's out-degree reached theta.
    """

    row_block: int
    col_block: int
    region: str | None
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    @property
    def triple_count(self) -> int:
        return len(self.rows)


@dataclass
class VectorBlock:
    """Sorted (vertex, value) entries of one sub-vector (or one region)."""

    block_index: int
    region: str | None
    ids: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class PartitionPlan:
    b: int
    psi: PsiSpec
    theta: float  # 0, a positive integer, or math.inf
    workers: int
    memory_budget: int | None
    vertex_count: int
    edge_count: int

    def to_json(self) -> dict:
        return {
            "b": self.b,
            "psi": self.psi.to_json(),
            "theta": "inf" if math.isinf(self.theta) else self.theta,
            "workers": self.workers,
            "memoryBudget": self.memory_budget,
            "vertexCount": self.vertex_count,
            "edgeCount": self.edge_count,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PartitionPlan":
        theta = obj["theta"]
        theta = math.inf if theta == "inf" else float(theta)
        return cls(
            b=int(obj["b"]),
            psi=PsiSpec.from_json(obj["psi"]),
            theta=theta,
            workers=int(obj["workers"]),
            memory_budget=obj.get("memoryBudget"),
            vertex_count=int(obj["vertexCount"]),
            edge_count=int(obj["edgeCount"]),
        )


@dataclass
class Partitioned:
    """A partitioned graph: blocks and sub-vectors split into regions."""

    plan: PartitionPlan
    stats: DegreeStats
    blocks: dict[tuple[int, int], dict[str, MatrixBlock]]
    vectors: dict[int, dict[str, VectorBlock]]
    out_degrees: np.ndarray
    id_map: np.ndarray | None = None

    def merged_block(self, i: int, j: int) -> MatrixBlock:
        """The whole block M(i, j) with the region split undone."""
        s = self.blocks[(i, j)]["s"]
        d = self.blocks[(i, j)]["d"]
        if d.triple_count == 0:
            return MatrixBlock(i, j, None, s.rows, s.cols, s.vals)
        if s.triple_count == 0:
            return MatrixBlock(i, j, None, d.rows, d.cols, d.vals)
        rows = np.concatenate([s.rows, d.rows])
        cols = np.concatenate([s.cols, d.cols])
        vals = np.concatenate([s.vals, d.vals])
        order = np.lexsort((cols, rows))
        return MatrixBlock(i, j, None, rows[order], cols[order], vals[order])

    def merged_vector(self, i: int) -> VectorBlock:
        s = self.vectors[i]["s"]
        d = self.vectors[i]["d"]
        ids = np.concatenate([s.ids, d.ids])
        values = np.concatenate([s.values, d.values])
        order = np.argsort(ids)
        return VectorBlock(i, None, ids[order], values[order])


def choose_block_count(vertex_count: int, workers: int, memory_budget: int | None) -> int:
    """Pick b: the worker count unless sub-vectors would overflow memory.

    With a budget of M vector elements per worker, b = W when |v|/M < W
    (parallelism bound), otherwise ceil(|v|/M) so each sub-vector fits.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if memory_budget is None:
        return workers
    if memory_budget < 1:
        raise ValueError("memory budget must be >= 1")
    if vertex_count / memory_budget < workers:
        return workers
    return math.ceil(vertex_count / memory_budget)


def degree_histograms(edges: EdgeList) -> DegreeStats:
    """Exact in/out degree histograms over the dense id universe.

    Degrees follow matrix semantics: duplicate (src, dst) records count
    once.  Every vertex appears in both histograms, including degree 0.
    """
    el = dedupe(edges)
    n = el.n_vertices
    in_deg = np.bincount(el.dst, minlength=n) if n else np.empty(0, np.int64)
    out_deg = np.bincount(el.src, minlength=n) if n else np.empty(0, np.int64)
    stats = _stats_from_degrees(in_deg, out_deg, n, el.edge_count)
    return stats


def _stats_from_degrees(in_deg, out_deg, n, m) -> DegreeStats:
    def hist(deg):
        vals, counts = np.unique(deg, return_counts=True)
        return {int(d): int(c) for d, c in zip(vals, counts)}

    return DegreeStats(
        in_hist=hist(in_deg) if n else {},
        out_hist=hist(out_deg) if n else {},
        vertex_count=int(n),
        edge_count=int(m),
    )


def split_by_degree(
    blocks: dict[tuple[int, int], MatrixBlock],
    vectors: dict[int, VectorBlock],
    theta: float,
    out_degrees: np.ndarray,
) -> tuple[dict[tuple[int, int], dict[str, MatrixBlock]], dict[int, dict[str, VectorBlock]]]:
    """Split whole blocks and sub-vectors into sparse/dense regions.

    A triple is dense iff its source's out-degree is >= theta; a vector
    entry is dense iff the vertex's own out-degree is >= theta.  theta=0
    makes everything dense, theta=inf everything sparse.
    """
    split_blocks: dict[tuple[int, int], dict[str, MatrixBlock]] = {}
    for (i, j), blk in blocks.items():
        dense = out_degrees[blk.cols] >= theta if blk.triple_count else np.empty(0, bool)
        sparse = ~dense
        split_blocks[(i, j)] = {
            "s": MatrixBlock(i, j, "s", blk.rows[sparse], blk.cols[sparse], blk.vals[sparse]),
            "d": MatrixBlock(i, j, "d", blk.rows[dense], blk.cols[dense], blk.vals[dense]),
        }
    split_vectors: dict[int, dict[str, VectorBlock]] = {}
    for i, vec in vectors.items():
        dense = out_degrees[vec.ids] >= theta if len(vec) else np.empty(0, bool)
        sparse = ~dense
        split_vectors[i] = {
            "s": VectorBlock(i, "s", vec.ids[sparse], vec.values[sparse]),
            "d": VectorBlock(i, "d", vec.ids[dense], vec.values[dense]),
        }
    return split_blocks, split_vectors


def build_plan(
    el: EdgeList,
    blocks: int | str = "auto",
    theta: float | str = math.inf,
    workers: int = 4,
    memory_budget: int | None = None,
    psi: str = "hash",
) -> tuple[PartitionPlan, DegreeStats]:
    """Resolve 'auto' knobs against the graph's degree statistics."""
    stats = degree_histograms(el)
    n = el.n_vertices
    b = choose_block_count(n, workers, memory_budget) if blocks == "auto" else int(blocks)
    if b < 1:
        raise ValueError("block count must be >= 1")
    if psi == "hash":
        psi_spec = PsiSpec(kind="hash")
    elif psi == "range":
        psi_spec = range_psi(n, b)
    else:
        raise ValueError(f"unknown psi kind {psi!r}")
    if theta == "auto":
        from . import costmodel  # local import: costmodel consumes DegreeStats

        theta_value, _ = costmodel.choose_theta(b, n, stats)
    elif theta == "inf":
        theta_value = math.inf
    else:
        theta_value = float(theta)
        if theta_value < 0:
            raise ValueError("theta must be non-negative")
    plan = PartitionPlan(
        b=b,
        psi=psi_spec,
        theta=theta_value,
        workers=workers,
        memory_budget=memory_budget,
        vertex_count=n,
        edge_count=stats.edge_count,
    )
    return plan, stats


def partition(el: EdgeList, plan: PartitionPlan) -> Partitioned:
    """Place every deduplicated edge in its block and split regions by theta.

    Edge (q -> p, w) becomes triple (p, q, w) in block (psi(p), psi(q));
    every vertex lands in exactly one sub-vector.  Vector values are
    initialized to zero placeholders; programs set them at run time.
    """
    deduped = dedupe(el)
    n = deduped.n_vertices
    if n == 0 and deduped.edge_count == 0:
        raise EmptyGraph("nothing to partition: no edges and no vertices")
    b = plan.b
    stats = degree_histograms(deduped)
    out_deg = np.bincount(deduped.src, minlength=n)

    rows = deduped.dst
    cols = deduped.src
    vals = deduped.weight
    bp = plan.psi.assign(rows, b)
    bq = plan.psi.assign(cols, b)
    block_key = bp * b + bq
    order = np.lexsort((cols, rows, block_key))
    block_key = block_key[order]
    rows, cols, vals = rows[order], cols[order], vals[order]
    bounds = np.searchsorted(block_key, np.arange(b * b + 1))

    whole_blocks: dict[tuple[int, int], MatrixBlock] = {}
    for i in range(b):
        for j in range(b):
            k = i * b + j
            lo, hi = bounds[k], bounds[k + 1]
            whole_blocks[(i, j)] = MatrixBlock(
                i, j, None, rows[lo:hi], cols[lo:hi], vals[lo:hi]
            )

    all_ids = np.arange(n, dtype=np.int64)
    vid_block = plan.psi.assign(all_ids, b)
    whole_vectors: dict[int, VectorBlock] = {}
    for i in range(b):
        ids = all_ids[vid_block == i]
        whole_vectors[i] = VectorBlock(i, None, ids, np.zeros(len(ids), np.float64))

    split_blocks, split_vectors = split_by_degree(
        whole_blocks, whole_vectors, plan.theta, out_deg
    )
    id_map = deduped.id_map if deduped.id_map is not None else all_ids.copy()
    return Partitioned(plan, stats, split_blocks, split_vectors, out_deg, id_map)


# ---------------------------------------------------------------------------
# On-disk layout


def write_triples(path: str, rows, cols, vals) -> None:
    arr = np.empty(len(rows), dtype=TRIPLE_DTYPE)
    arr["p"] = rows
    arr["q"] = cols
    arr["m"] = vals
    arr.tofile(path)


def read_triples(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    arr = np.fromfile(path, dtype=TRIPLE_DTYPE)
    return (
        arr["p"].astype(np.int64),
        arr["q"].astype(np.int64),
        arr["m"].astype(np.float64),
    )


def write_vector_records(path: str, ids, values) -> None:
    arr = np.empty(len(ids), dtype=VECTOR_DTYPE)
    arr["p"] = ids
    arr["v"] = values
    arr.tofile(path)


def read_vector_records(path: str) -> tuple[np.ndarray, np.ndarray]:
    arr = np.fromfile(path, dtype=VECTOR_DTYPE)
    return arr["p"].astype(np.int64), arr["v"].astype(np.float64)


def write_partition(part: Partitioned, directory: str) -> None:
    os.makedirs(os.path.join(directory, "blocks"), exist_ok=True)
    os.makedirs(os.path.join(directory, "vectors"), exist_ok=True)
    with open(os.path.join(directory, "plan.json"), "w", encoding="utf-8") as fh:
        json.dump(part.plan.to_json(), fh, sort_keys=True, indent=2)
    with open(os.path.join(directory, "stats.json"), "w", encoding="utf-8") as fh:
        json.dump(part.stats.to_json(), fh, sort_keys=True, indent=2)
    id_map = part.id_map
    if id_map is None:
        id_map = np.arange(part.plan.vertex_count, dtype=np.int64)
    id_map.astype("<u8").tofile(os.path.join(directory, "idmap.bin"))
    for (i, j), regions in part.blocks.items():
        for region, blk in regions.items():
            path = os.path.join(directory, "blocks", f"M_{i}_{j}_{region}.bin")
            write_triples(path, blk.rows, blk.cols, blk.vals)
    for i, regions in part.vectors.items():
        for region, vec in regions.items():
            path = os.path.join(directory, "vectors", f"v_{i}_{region}.bin")
            write_vector_records(path, vec.ids, vec.values)


def load_partition(directory: str) -> Partitioned:
    with open(os.path.join(directory, "plan.json"), "r", encoding="utf-8") as fh:
        plan = PartitionPlan.from_json(json.load(fh))
    with open(os.path.join(directory, "stats.json"), "r", encoding="utf-8") as fh:
        stats = DegreeStats.from_json(json.load(fh))
    id_map = np.fromfile(os.path.join(directory, "idmap.bin"), dtype="<u8").astype(np.int64)
    blocks: dict[tuple[int, int], dict[str, MatrixBlock]] = {}
    out_deg = np.zeros(plan.vertex_count, dtype=np.int64)
    for i in range(plan.b):
        for j in range(plan.b):
            regions = {}
            for region in ("s", "d"):
                path = os.path.join(directory, "blocks", f"M_{i}_{j}_{region}.bin")
                rows, cols, vals = read_triples(path)
                regions[region] = MatrixBlock(i, j, region, rows, cols, vals)
                if len(cols):
                    out_deg += np.bincount(cols, minlength=plan.vertex_count)
            blocks[(i, j)] = regions
    vectors: dict[int, dict[str, VectorBlock]] = {}
    for i in range(plan.b):
        regions_v = {}
        for region in ("s", "d"):
            path = os.path.join(directory, "vectors", f"v_{i}_{region}.bin")
            ids, values = read_vector_records(path)
            regions_v[region] = VectorBlock(i, region, ids, values)
        vectors[i] = regions_v
    return Partitioned(plan, stats, blocks, vectors, out_deg, id_map)
