"""Metered in-process stand-in for the shared vector store.

Workers exchange data exclusively through this store: current sub-vectors
and, for vertical-style execution, off-diagonal sub-multiplication
results.  Every put and get is counted in vector elements into a ledger
whose four categories match how the cost analysis decomposes an
iteration: full-block vector reads/writes and intermediate transfers.
Matrix triples are read once per run through a separate counter that
never enters the per-iteration totals.

Keys are unique per iteration and diagonal sub-results are never stored;
they stay local to the worker that produced them.  A get of a key that
was never put signals a barrier-ordering bug in the caller.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field, replace

import numpy as np

from .partition import write_vector_records


class DuplicateKey(KeyError):
    """A key was put twice within one iteration."""


class MissingKey(KeyError):
    """A get ran before the matching put; the barrier contract was broken."""


@dataclass(frozen=True)
class StoreKey:
    kind: str  # "vector" | "intermediate"
    i: int
    j: int | None
    region: str | None
    iteration: int

    @classmethod
    def vector(cls, i: int, region: str, iteration: int) -> "StoreKey":
        return cls("vector", i, None, region, iteration)

    @classmethod
    def intermediate(cls, i: int, j: int, iteration: int) -> "StoreKey":
        return cls("intermediate", i, j, None, iteration)


@dataclass
class IterationCounters:
    """Element counts for one iteration; matrix reads are tracked apart."""

    vector_read: int = 0
    vector_write: int = 0
    intermediate_write: int = 0
    intermediate_read: int = 0
    matrix_read: int = 0

    @property
    def total(self) -> int:
        return (
            self.vector_read
            + self.vector_write
            + self.intermediate_write
            + self.intermediate_read
        )

    def copy(self) -> "IterationCounters":
        return replace(self)

    def to_json(self) -> dict:
        return {
            "vectorRead": self.vector_read,
            "intermediateWrite": self.intermediate_write,
            "intermediateRead": self.intermediate_read,
            "vectorWrite": self.vector_write,
            "total": self.total,
        }


@dataclass(frozen=True)
class StoreEvent:
    seq: int
    iteration: int
    op: str  # "put" | "get"
    key: StoreKey
    elements: int


@dataclass
class IoLedger:
    """Per-iteration counters plus running totals, all in vector elements."""

    per_iteration: dict[int, IterationCounters] = field(default_factory=dict)
    cumulative: IterationCounters = field(default_factory=IterationCounters)

    def bucket(self, iteration: int) -> IterationCounters:
        if iteration not in self.per_iteration:
            self.per_iteration[iteration] = IterationCounters()
        return self.per_iteration[iteration]

    def add(self, iteration: int, category: str, elements: int) -> None:
        bucket = self.bucket(iteration)
        setattr(bucket, category, getattr(bucket, category) + elements)
        setattr(self.cumulative, category, getattr(self.cumulative, category) + elements)

    def snapshot(self, iteration: int) -> IterationCounters:
        return self.bucket(iteration).copy()


def ledger_json(snapshots: list[IterationCounters], matrix_read: int) -> dict:
    totals = IterationCounters()
    for snap in snapshots:
        totals.vector_read += snap.vector_read
        totals.vector_write += snap.vector_write
        totals.intermediate_write += snap.intermediate_write
        totals.intermediate_read += snap.intermediate_read
    entries = [dict(iteration=t + 1, **snap.to_json()) for t, snap in enumerate(snapshots)]
    return {"iterations": entries, "totals": totals.to_json(), "matrixRead": matrix_read}


CSV_HEADER = "iteration,strategy,theta,vectorRead,intermediateWrite,intermediateRead,vectorWrite,total"


def ledger_csv(snapshots: list[IterationCounters], strategy: str, theta) -> str:
    """Figure-style measured rows: one line per iteration."""
    theta_text = "" if theta is None else ("inf" if theta == float("inf") else f"{theta:g}")
    lines = [CSV_HEADER]
    for t, snap in enumerate(snapshots, start=1):
        lines.append(
            f"{t},{strategy},{theta_text},{snap.vector_read},{snap.intermediate_write},"
            f"{snap.intermediate_read},{snap.vector_write},{snap.total}"
        )
    return "\n".join(lines) + "\n"


class MeteredStore:
    """Shared key-value store with atomic element accounting.

    put/get are safe under concurrent worker access; a key is written once
    and may be read many times.  ``backing_dir`` additionally persists
    every vector put in the partition layout's binary record format.
    """

    def __init__(self, backing_dir: str | None = None):
        self._data: dict[StoreKey, tuple[np.ndarray, np.ndarray]] = {}
        self._lock = threading.Lock()
        self.ledger = IoLedger()
        self.events: list[StoreEvent] = []
        self.current_iteration = 0
        self.backing_dir = backing_dir
        if backing_dir is not None:
            os.makedirs(os.path.join(backing_dir, "vectors"), exist_ok=True)

    def begin_iteration(self, iteration: int) -> None:
        self.current_iteration = iteration

    def put(self, key: StoreKey, ids: np.ndarray, values: np.ndarray) -> None:
        if key.kind == "intermediate" and key.i == key.j:
            raise ValueError("diagonal sub-results stay worker-local and are never stored")
        category = "vector_write" if key.kind == "vector" else "intermediate_write"
        with self._lock:
            if key in self._data:
                raise DuplicateKey(f"{key} already stored")
            self._data[key] = (ids, values)
            self.ledger.add(self.current_iteration, category, len(ids))
            self.events.append(
                StoreEvent(len(self.events), self.current_iteration, "put", key, len(ids))
            )
        if self.backing_dir is not None and key.kind == "vector":
            path = os.path.join(self.backing_dir, "vectors", f"v_{key.i}_{key.region}.bin")
            write_vector_records(path, ids, values)

    def get(self, key: StoreKey) -> tuple[np.ndarray, np.ndarray]:
        category = "vector_read" if key.kind == "vector" else "intermediate_read"
        with self._lock:
            if key not in self._data:
                raise MissingKey(f"{key} was never stored; barrier ordering violated")
            ids, values = self._data[key]
            self.ledger.add(self.current_iteration, category, len(ids))
            self.events.append(
                StoreEvent(len(self.events), self.current_iteration, "get", key, len(ids))
            )
        return ids, values

    def peek(self, key: StoreKey) -> tuple[np.ndarray, np.ndarray]:
        """Uncounted read, for assembling results after a run."""
        with self._lock:
            if key not in self._data:
                raise MissingKey(f"{key} was never stored")
            return self._data[key]

    def count_matrix_read(self, elements: int) -> None:
        with self._lock:
            self.ledger.add(self.current_iteration, "matrix_read", elements)

    def evict_iteration(self, iteration: int) -> None:
        """Drop data produced in an iteration; counters and events remain."""
        with self._lock:
            stale = [k for k in self._data if k.iteration == iteration]
            for k in stale:
                del self._data[k]

    def evict_intermediates(self, iteration: int) -> None:
        """Drop an iteration's sub-results once they have been combined."""
        with self._lock:
            stale = [
                k
                for k in self._data
                if k.iteration == iteration and k.kind == "intermediate"
            ]
            for k in stale:
                del self._data[k]

    def snapshot_ledger(self, iteration: int) -> IterationCounters:
        with self._lock:
            return self.ledger.snapshot(iteration)

    def intermediate_order_violations(self) -> list[StoreKey]:
        """Intermediate keys whose first get precedes their put, if any."""
        put_seq: dict[StoreKey, int] = {}
        violations = []
        for ev in self.events:
            if ev.key.kind != "intermediate":
                continue
            if ev.op == "put":
                put_seq[ev.key] = ev.seq
            elif ev.key not in put_seq or put_seq[ev.key] > ev.seq:
                violations.append(ev.key)
        return violations
