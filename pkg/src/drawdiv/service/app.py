"""HTTP front end exposing the handler layer."""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from ..errors import (
    DegenerateDiffusion,
    DomainError,
    DrawdivError,
    RegimeError,
)
from . import handlers
from . import schemas as S


def create_app() -> FastAPI:
    app = FastAPI(
        title="drawdiv",
        description="Optimal dividend rates under a drawdown constraint",
    )

    @app.exception_handler(DrawdivError)
    async def _drawdiv_error(request, exc: DrawdivError):
        status = 422 if isinstance(exc, (DomainError, RegimeError, DegenerateDiffusion)) else 409
        return JSONResponse(
            status_code=status,
            content=S.ErrorResponse(error=type(exc).__name__, message=str(exc)).model_dump(),
        )

    @app.post("/solve", response_model=S.SolveResponse)
    def solve(req: S.SolveRequest):
        return handlers.handle_solve(req)

    @app.post("/verify", response_model=S.VerifyResponse)
    def verify(req: S.VerifyRequest):
        return handlers.handle_verify(req)

    @app.post("/value", response_model=S.ValueResponse)
    def value(req: S.ValueRequest):
        return handlers.handle_value(req)

    @app.post("/simulate", response_model=S.SimulateResponse)
    def sim(req: S.SimulateRequest):
        return handlers.handle_simulate(req)

    @app.post("/det", response_model=S.DetResponse)
    def det(req: S.DetRequest):
        return handlers.handle_det(req)

    @app.post("/asymptotics", response_model=S.AsymptoticsResponse)
    def asymptotics(req: S.AsymptoticsRequest):
        return handlers.handle_asymptotics(req)

    return app


app = create_app()
