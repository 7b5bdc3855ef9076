"""The operations behind the HTTP endpoints and the CLI subcommands.

Both surfaces funnel through these functions so behavior cannot drift
between them.  Errors split into two kinds: ``UsageError`` for parameter
combinations that can never work, and ``DataError`` for inputs that are
missing or malformed.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .. import costmodel, engine, gimv
from ..edgelist import EmptyInput, ParseError, parse_edge_list, write_edge_list
from ..partition import (
    DegreeStats,
    EmptyGraph,
    PartitionPlan,
    Partitioned,
    build_plan,
    load_partition,
    partition,
    write_partition,
    write_vector_records,
)
from ..rmat import RmatParams, generate_rmat
from ..storage import ledger_csv, ledger_json
from . import schemas


class UsageError(Exception):
    """The request itself is invalid, independent of any data."""


class DataError(Exception):
    """The referenced data is missing, malformed, or inconsistent."""


def do_partition(req: schemas.PartitionRequest) -> schemas.PartitionResponse:
    try:
        el = parse_edge_list(req.input)
    except FileNotFoundError as exc:
        raise DataError(f"input file not found: {req.input}") from exc
    except (ParseError, EmptyInput) as exc:
        raise DataError(str(exc)) from exc
    try:
        plan, _ = build_plan(
            el,
            blocks=req.blocks,
            theta=req.theta,
            workers=req.workers,
            memory_budget=req.memory_budget,
            psi=req.psi,
        )
        part = partition(el, plan)
    except (ValueError, EmptyGraph) as exc:
        raise UsageError(str(exc)) from exc
    write_partition(part, req.output)
    return schemas.PartitionResponse(
        output=req.output, plan=schemas.PlanModel(**plan.to_json())
    )


def _load(data_dir: str) -> Partitioned:
    try:
        return load_partition(data_dir)
    except FileNotFoundError as exc:
        raise DataError(f"not a partition directory: {data_dir}") from exc
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataError(f"corrupt partition directory {data_dir}: {exc}") from exc


def _load_plan_stats(data_dir: str) -> tuple[PartitionPlan, DegreeStats]:
    try:
        with open(os.path.join(data_dir, "plan.json"), "r", encoding="utf-8") as fh:
            plan = PartitionPlan.from_json(json.load(fh))
        with open(os.path.join(data_dir, "stats.json"), "r", encoding="utf-8") as fh:
            stats = DegreeStats.from_json(json.load(fh))
    except FileNotFoundError as exc:
        raise DataError(f"not a partition directory: {data_dir}") from exc
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataError(f"corrupt partition directory {data_dir}: {exc}") from exc
    return plan, stats


def _dense_source(part: Partitioned, original_id: int) -> int:
    id_map = part.id_map
    pos = int(np.searchsorted(id_map, original_id))
    if pos >= len(id_map) or id_map[pos] != original_id:
        raise DataError(f"source vertex {original_id} does not exist in the graph")
    return pos


def do_run(req: schemas.RunRequest) -> schemas.RunResponse:
    part = _load(req.data)

    source = None
    if req.algorithm in ("sssp", "rwr"):
        if req.source is None:
            raise UsageError(f"--source is required for {req.algorithm}")
        source = _dense_source(part, req.source)

    theta = None
    theta_auto = False
    if req.theta == "auto":
        theta_auto = True
    elif req.theta == "inf":
        theta = math.inf
    elif req.theta is not None:
        theta = float(req.theta)
        if theta < 0:
            raise UsageError("--theta must be non-negative")

    config = engine.RunConfig(
        strategy=req.strategy,
        algorithm=req.algorithm,
        max_iterations=req.iterations,
        epsilon=req.epsilon,
        workers=req.workers,
        theta=theta,
        theta_auto=theta_auto,
        seed=req.seed,
        source=source,
        restart=req.restart,
        use_threads=req.threads,
    )
    program = gimv.build_program(req.algorithm, source=source, restart=req.restart)
    report = engine.run(part, program, config)

    # Persist the result vector in the partition layout, split by the
    # plan's theta so the directory stays self-consistent.
    full = report.final_vector()
    vec_dir = os.path.join(req.data, "vectors")
    for i in range(part.plan.b):
        for region in ("s", "d"):
            ids = part.vectors[i][region].ids
            write_vector_records(
                os.path.join(vec_dir, f"v_{i}_{region}.bin"), ids, full[ids]
            )
    report.location = vec_dir

    report_path = req.report or os.path.join(req.data, "report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
    if req.ledger_json:
        with open(req.ledger_json, "w", encoding="utf-8") as fh:
            json.dump(ledger_json(report.ledger, report.matrix_read), fh, indent=2)
    if req.ledger_csv:
        with open(req.ledger_csv, "w", encoding="utf-8") as fh:
            fh.write(ledger_csv(report.ledger, report.strategy, report.theta))

    return schemas.RunResponse(**report.to_json())


def do_estimate(req: schemas.EstimateRequest) -> schemas.EstimateResponse:
    plan, stats = _load_plan_stats(req.data)
    b, n, m = plan.b, plan.vertex_count, plan.edge_count
    horizontal = costmodel.cost_horizontal(b, n)
    vertical = costmodel.cost_vertical(b, n, m)
    _, best = costmodel.choose_theta(b, n, stats)
    sweep = None
    if req.theta_sweep:
        sweep = [
            schemas.CostEstimateModel(**est.to_json())
            for est in costmodel.theta_sweep(b, n, stats)
        ]
    return schemas.EstimateResponse(
        horizontal=schemas.CostEstimateModel(**horizontal.to_json()),
        vertical=schemas.CostEstimateModel(**vertical.to_json()),
        hybridBest=schemas.CostEstimateModel(**best.to_json()),
        decisionValue=costmodel.selection_predicate(b, n, m),
        selected=costmodel.select_strategy(b, n, m),
        sweep=sweep,
    )


def do_generate_rmat(req: schemas.RmatRequest) -> schemas.GenerateResponse:
    try:
        params = RmatParams(
            scale=req.scale, edges=req.edges, a=req.a, b=req.b, c=req.c, d=req.d,
            seed=req.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    el = generate_rmat(params)
    written = write_edge_list(el, req.output)
    return schemas.GenerateResponse(
        output=req.output, edges=written, vertices=el.n_vertices
    )


def do_stats(data_dir: str) -> schemas.StatsResponse:
    plan, stats = _load_plan_stats(data_dir)
    stats_json = stats.to_json()
    return schemas.StatsResponse(
        vertexCount=stats.vertex_count,
        edgeCount=stats.edge_count,
        b=plan.b,
        theta="inf" if math.isinf(plan.theta) else plan.theta,
        maxInDegree=max(stats.in_hist) if stats.in_hist else 0,
        maxOutDegree=max(stats.out_hist) if stats.out_hist else 0,
        inHist=stats_json["inHist"],
        outHist=stats_json["outHist"],
    )
