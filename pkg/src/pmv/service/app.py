"""FastAPI application exposing partitioning, runs, estimates, and generation.

The service is stateless: all state lives in partition directories on the
filesystem named by requests, so any number of clients can share one
server. Runs execute synchronously within the request.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import ops, schemas


def create_app() -> FastAPI:
    app = FastAPI(title="pmv", version="0.1.0")

    @app.exception_handler(ops.DataError)
    async def data_error(request: Request, exc: ops.DataError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(ops.UsageError)
    async def usage_error(request: Request, exc: ops.UsageError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/partition", response_model=schemas.PartitionResponse)
    def partition(req: schemas.PartitionRequest):
        return ops.do_partition(req)

    @app.post("/run", response_model=schemas.RunResponse)
    def run(req: schemas.RunRequest):
        return ops.do_run(req)

    @app.post("/estimate", response_model=schemas.EstimateResponse)
    def estimate(req: schemas.EstimateRequest):
        return ops.do_estimate(req)

    @app.post("/generate/rmat", response_model=schemas.GenerateResponse)
    def generate_rmat(req: schemas.RmatRequest):
        return ops.do_generate_rmat(req)

    @app.get("/stats", response_model=schemas.StatsResponse)
    def stats(data: str):
        return ops.do_stats(data)

    return app
