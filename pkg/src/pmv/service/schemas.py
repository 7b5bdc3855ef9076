"""Request/response models shared by the HTTP service and the CLI client.

Wire keys that also appear in files (ledger entries, cost estimates,
degree histograms) use the same camelCase names as the JSON/CSV exports,
so responses diff cleanly against on-disk artifacts.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class PartitionRequest(BaseModel):
    input: str
    output: str
    blocks: int | Literal["auto"] = "auto"
    theta: float | Literal["auto", "inf"] = "auto"
    workers: int = Field(default=4, ge=1)
    memory_budget: int | None = Field(default=None, ge=1)
    psi: Literal["hash", "range"] = "hash"


class PlanModel(BaseModel):
    b: int
    psi: dict
    theta: float | Literal["inf"]
    workers: int
    memoryBudget: int | None
    vertexCount: int
    edgeCount: int


class PartitionResponse(BaseModel):
    output: str
    plan: PlanModel


class RunRequest(BaseModel):
    data: str
    algorithm: Literal["pagerank", "rwr", "sssp", "cc"]
    strategy: Literal["horizontal", "vertical", "selective", "hybrid"] = "selective"
    iterations: int = Field(default=20, ge=1)
    epsilon: float = Field(default=0.0, ge=0.0)
    source: int | None = None  # original (pre-densification) vertex id
    restart: float = Field(default=0.15, ge=0.0, le=1.0)
    theta: float | Literal["auto", "inf"] | None = None
    seed: int = 0
    workers: int | None = Field(default=None, ge=1)
    threads: bool = False
    report: str | None = None
    ledger_csv: str | None = None
    ledger_json: str | None = None


class LedgerEntryModel(BaseModel):
    iteration: int
    vectorRead: int
    intermediateWrite: int
    intermediateRead: int
    vectorWrite: int
    total: int


class LedgerTotalsModel(BaseModel):
    vectorRead: int
    intermediateWrite: int
    intermediateRead: int
    vectorWrite: int
    total: int


class LedgerModel(BaseModel):
    iterations: list[LedgerEntryModel]
    totals: LedgerTotalsModel
    matrixRead: int


class RunResponse(BaseModel):
    strategy: str
    algorithm: str
    b: int
    theta: float | Literal["inf"] | None
    chosenStrategy: str | None
    decisionValue: float | None
    iterations: int
    converged: bool
    changedCounts: list[int]
    l1Deltas: list[float]
    ledger: LedgerModel
    location: str | None


class CostEstimateModel(BaseModel):
    strategy: str
    expectedElements: float
    vectorRead: float
    intermediateTransfer: float
    vectorWrite: float
    theta: float | Literal["inf"] | None = None


class EstimateRequest(BaseModel):
    data: str
    theta_sweep: bool = False


class EstimateResponse(BaseModel):
    horizontal: CostEstimateModel
    vertical: CostEstimateModel
    hybridBest: CostEstimateModel
    decisionValue: float
    selected: Literal["horizontal", "vertical"]
    sweep: list[CostEstimateModel] | None = None


class RmatRequest(BaseModel):
    scale: int = Field(ge=0)
    edges: int = Field(ge=0)
    a: float = 0.57
    b: float = 0.19
    c: float = 0.19
    d: float = 0.05
    seed: int = 0
    output: str


class GenerateResponse(BaseModel):
    output: str
    edges: int
    vertices: int


class StatsResponse(BaseModel):
    vertexCount: int
    edgeCount: int
    b: int
    theta: float | Literal["inf"]
    maxInDegree: int
    maxOutDegree: int
    inHist: list[list[int]]
    outHist: list[list[int]]
