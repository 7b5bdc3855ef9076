"""Edge-list ingestion and text serialization.

The raw graph input is a directed edge list: one ``src dst [weight]``
record per line, separated by tabs or whitespace, with ``#`` comment lines
ignored.  Vertex ids are densified to ``0..n-1`` on ingestion and the
mapping back to the original numbering is kept, so downstream modules can
always treat the vertex universe as a contiguous range.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

# Block/file formats store ids as u64; the dedup key packs (src, dst) into
# one u64, which bounds the ids we accept.
MAX_VERTEX_ID = 2**32 - 1


class ParseError(ValueError):
    """A malformed edge-list line, carrying its 1-based line number."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class EmptyInput(ValueError):
    """The input contained no edge records at all."""


@dataclass
class EdgeList:
    """Directed edges over a dense vertex universe ``0..n_vertices-1``.

    ``id_map[i]`` gives the original id of dense vertex ``i``.  When
    ``id_map`` is None the ids were already dense and the universe is
    explicit, so isolated vertices are retained.  Duplicate (src, dst)
    records are allowed here; matrix semantics are applied by ``dedupe``.
    """

    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    n_vertices: int
    id_map: np.ndarray | None = None
    path: str | None = None
    line_count: int = 0

    @property
    def edge_count(self) -> int:
        return len(self.src)

    def original_ids(self, dense: np.ndarray) -> np.ndarray:
        if self.id_map is None:
            return np.asarray(dense, dtype=np.int64)
        return self.id_map[np.asarray(dense)]

    def to_dense(self, original_id: int) -> int:
        """Map one original id back to its dense index."""
        if original_id < 0:
            raise KeyError(f"unknown vertex id {original_id}")
        if self.id_map is None:
            if original_id >= self.n_vertices:
                raise KeyError(f"unknown vertex id {original_id}")
            return int(original_id)
        pos = int(np.searchsorted(self.id_map, original_id))
        if pos >= len(self.id_map) or self.id_map[pos] != original_id:
            raise KeyError(f"unknown vertex id {original_id}")
        return pos


def from_records(
    src,
    dst,
    weight=None,
    n_vertices: int | None = None,
    path: str | None = None,
    line_count: int = 0,
) -> EdgeList:
    """Build an EdgeList, densifying ids unless an explicit universe is given.

    With ``n_vertices`` set, ids are taken as already dense in
    ``0..n_vertices-1``; otherwise the distinct ids are sorted and remapped
    to a contiguous range, preserving relative order.
    """
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if weight is None:
        weight = np.ones(len(src), dtype=np.float64)
    else:
        weight = np.asarray(weight, dtype=np.float64)
    if len(src) != len(dst) or len(src) != len(weight):
        raise ValueError("src, dst and weight must have equal length")
    if len(src) and (src.min() < 0 or dst.min() < 0):
        raise ValueError("vertex ids must be non-negative")

    if n_vertices is not None:
        if len(src) and max(int(src.max()), int(dst.max())) >= n_vertices:
            raise ValueError("vertex id outside the declared universe")
        return EdgeList(src, dst, weight, int(n_vertices), None, path, line_count)

    ids = np.unique(np.concatenate([src, dst])) if len(src) else np.empty(0, np.int64)
    dense_src = np.searchsorted(ids, src).astype(np.int64)
    dense_dst = np.searchsorted(ids, dst).astype(np.int64)
    return EdgeList(dense_src, dense_dst, weight, len(ids), ids, path, line_count)


def dedupe(el: EdgeList) -> EdgeList:
    """Collapse duplicate (src, dst) records, keeping the first weight.

    A matrix cell holds a single value, so repeated edges are merged here
    before any degree statistics or blocks are derived.
    """
    if el.edge_count == 0:
        return el
    if el.n_vertices > MAX_VERTEX_ID:
        raise ValueError("vertex universe too large for dedup key packing")
    key = (el.src.astype(np.uint64) << np.uint64(32)) | el.dst.astype(np.uint64)
    _, first = np.unique(key, return_index=True)
    first.sort()
    return replace(el, src=el.src[first], dst=el.dst[first], weight=el.weight[first])


def parse_edge_list(path: str) -> EdgeList:
    """Parse a text edge list, densifying ids.

    Malformed lines raise ``ParseError`` with the 1-based line number; a
    file without any records raises ``EmptyInput``.
    """
    src: list[int] = []
    dst: list[int] = []
    weight: list[float] = []
    line_count = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line_count = line_no
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.split()
            if len(fields) not in (2, 3):
                raise ParseError(line_no, f"expected 2 or 3 fields, got {len(fields)}")
            try:
                s = int(fields[0])
                d = int(fields[1])
            except ValueError:
                raise ParseError(line_no, f"non-integer vertex id in {fields[:2]}") from None
            if s < 0 or d < 0:
                raise ParseError(line_no, "negative vertex id")
            if len(fields) == 3:
                try:
                    w = float(fields[2])
                except ValueError:
                    raise ParseError(line_no, f"non-numeric weight {fields[2]!r}") from None
                if not np.isfinite(w):
                    raise ParseError(line_no, f"non-finite weight {fields[2]!r}")
            else:
                w = 1.0
            src.append(s)
            dst.append(d)
            weight.append(w)
    if not src:
        raise EmptyInput(f"no edge records in {path}")
    return from_records(src, dst, weight, path=path, line_count=line_count)


def write_edge_list(el: EdgeList, path: str) -> int:
    """Write edges as text using original ids; returns the record count.

    Weights equal to 1.0 are omitted so unweighted graphs round-trip to the
    two-field form; other weights are written with ``repr`` so re-parsing
    recovers them exactly.
    """
    osrc = el.original_ids(el.src)
    odst = el.original_ids(el.dst)
    with open(path, "w", encoding="utf-8") as fh:
        for s, d, w in zip(osrc.tolist(), odst.tolist(), el.weight.tolist()):
            if w == 1.0:
                fh.write(f"{s}\t{d}\n")
            else:
                fh.write(f"{s}\t{d}\t{w!r}\n")
    return el.edge_count
