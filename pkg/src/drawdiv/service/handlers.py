"""Pure request -> response handlers; the HTTP app and the CLI both call
these, so results are identical in-process and over the wire.
"""

from __future__ import annotations

import io
import math

import numpy as np

from ..boundaries import Absent, asymptotic_predictions, solve_xstar, solve_zstar
from ..curves import CurvePair, solve_A, solve_curves
from ..deterministic import DetParams, det_indifference_x, det_optimal_b, det_refraction_value
from ..errors import DomainError
from ..model import ModelParams, optimal_refraction_threshold
from ..simulate import ConstantRate, LumpSumNow, Refraction, TwoCurve, simulate
from ..surface import build_surface, eval_partials, eval_value, region_of
from ..verify import GridSpec, check_supersolution
from . import schemas as S


def _boundary(p: ModelParams) -> S.BoundaryOut:
    if not p.interesting_regime:
        return S.BoundaryOut(cbar=p.cbar, interesting_regime=False, bstar=0.0)
    b = optimal_refraction_threshold(p)
    z = solve_zstar(p, bstar=b)
    x = solve_xstar(p, zstar=z)
    pred = asymptotic_predictions(p)
    absent = isinstance(x, Absent)
    return S.BoundaryOut(
        cbar=p.cbar,
        interesting_regime=True,
        bstar=b,
        zstar=z,
        xstar=None if absent else x,
        xstar_absent=absent,
        limit=pred.limit,
        bstar_pred=pred.bstar_pred,
        zstar_pred=pred.zstar_pred,
        xstar_pred=pred.xstar_pred,
    )


def handle_solve(req: S.SolveRequest) -> S.SolveResponse:
    p = req.model.to_params()
    boundary = _boundary(p)
    if not p.interesting_regime:
        return S.SolveResponse(boundary=boundary)
    curves = solve_curves(p, n_steps=req.n_steps, stepper=req.stepper, c_low=req.c_low)
    curves = solve_A(p, curves, stepper=req.stepper)
    return S.SolveResponse(
        boundary=boundary,
        curves_csv=curves.to_csv(),
        truncated=curves.truncated,
        c_trunc=curves.c_trunc,
        truncation_reason=curves.truncation_reason,
    )


def handle_verify(req: S.VerifyRequest) -> S.VerifyResponse:
    p = req.model.to_params()
    curves = CurvePair.from_csv(req.curves_csv)
    s = build_surface(p, curves)
    rep = check_supersolution(s, grid=GridSpec(n_x=req.n_x, n_c=req.n_c), tol=req.tol)
    import json

    return S.VerifyResponse(passed=rep.passed, report=json.loads(rep.to_json()))


def handle_value(req: S.ValueRequest) -> S.ValueResponse:
    p = req.model.to_params()
    curves = CurvePair.from_csv(req.curves_csv)
    s = build_surface(p, curves)
    xs = np.linspace(req.x_start, req.x_stop, req.x_n)
    buf = io.StringIO()
    buf.write("x,c,W,Wx,Wxx,Wc,region\n")
    for x in xs:
        w = eval_value(s, float(x), req.c)
        wx, wxx, wc = eval_partials(s, float(x), req.c)
        reg = region_of(s, float(x), req.c)
        buf.write(
            f"{x:.17g},{req.c:.17g},{w:.17g},{wx:.17g},{wxx:.17g},{wc:.17g},{reg}\n"
        )
    return S.ValueResponse(csv=buf.getvalue())


def handle_simulate(req: S.SimulateRequest) -> S.SimulateResponse:
    p = req.model.to_params()
    if req.strategy == "constant":
        if req.d is None:
            raise DomainError("constant strategy requires the rate d")
        strat = ConstantRate(req.d)
    elif req.strategy == "refraction":
        if req.b is None:
            raise DomainError("refraction strategy requires the threshold b")
        low = p.a * p.cbar if req.low is None else req.low
        high = p.cbar if req.high is None else req.high
        strat = Refraction(b=req.b, low=low, high=high)
    elif req.strategy == "two-curve":
        if req.curves_csv is None:
            raise DomainError("two-curve strategy requires curves_csv")
        strat = TwoCurve(build_surface(p, CurvePair.from_csv(req.curves_csv)))
    else:
        strat = LumpSumNow()
    res = simulate(
        strat,
        x0=req.x0,
        c0=req.c0,
        p=p,
        dt=req.dt,
        horizon=req.horizon,
        n_paths=req.n_paths,
        seed=req.seed,
    )
    return S.SimulateResponse(
        estimate=res.estimate,
        std_error=res.std_error,
        n_paths=res.n_paths,
        mean_ruin_time=None if math.isnan(res.mean_ruin_time) else res.mean_ruin_time,
        fraction_ruined_by_horizon=res.fraction_ruined_by_horizon,
        seed=res.seed,
        algorithm=res.algorithm,
        strategy=res.strategy,
        dt=res.dt,
        horizon=res.horizon,
    )


def handle_det(req: S.DetRequest) -> S.DetResponse:
    dp = DetParams(mu=req.mu, q=req.q, a=req.a, cbar=req.cbar)
    optb = None
    if req.a * req.cbar > req.mu:
        optb = det_optimal_b(dp)
    value = None
    if req.x is not None:
        b = req.b if req.b is not None else (optb if optb is not None else 0.0)
        value = det_refraction_value(req.x, b, dp)
    return S.DetResponse(
        optimal_b=optb, indifference_x=det_indifference_x(dp), value=value
    )


def handle_asymptotics(req: S.AsymptoticsRequest) -> S.AsymptoticsResponse:
    buf = io.StringIO()
    buf.write("cbar,bstar,zstar,xstar,limit,bstar_pred,zstar_pred,xstar_pred\n")
    for cbar in req.cbar_grid:
        p = ModelParams(mu=req.mu, sigma=req.sigma, q=req.q, a=req.a, cbar=cbar)
        if not p.interesting_regime:
            raise DomainError(f"cbar={cbar} is outside the interesting regime")
        b = optimal_refraction_threshold(p)
        z = solve_zstar(p, bstar=b)
        xstar = ""
        if req.include_xstar:
            x = solve_xstar(p, zstar=z)
            xstar = "" if isinstance(x, Absent) else f"{x:.17g}"
        pred = asymptotic_predictions(p)
        buf.write(
            f"{cbar:.17g},{b:.17g},{z:.17g},{xstar},{pred.limit:.17g},"
            f"{pred.bstar_pred:.17g},{pred.zstar_pred:.17g},{pred.xstar_pred:.17g}\n"
        )
    return S.AsymptoticsResponse(csv=buf.getvalue())
