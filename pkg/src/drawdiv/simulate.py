"""Monte Carlo estimation of expected discounted dividends for admissible
drawdown strategies — the independent oracle for every closed-form value.

Paths are Euler–Maruyama with per-path counter-based random streams: path i
of a run with seed s consumes the Philox stream keyed by (s << 64) | i, so
results are independent of batching or execution order.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from numba import njit
from numpy.random import Generator, Philox

from .errors import DegenerateDiffusion, DomainError, InadmissibleRate
from .model import ModelParams
from .surface import ValueSurface

ALGORITHM_ID = "philox4x64:path-keyed:ziggurat:v1"

#: Normals generated per kernel invocation; results are chunk-size invariant
#: because each path owns its whole stream.
CHUNK = 8192

# strategy modes passed to the kernel
_MODE_CONSTANT = 0
_MODE_REFRACTION = 1
_MODE_TWO_CURVE = 2

_STATUS_LIVE = 0
_STATUS_RUINED = 1
_STATUS_INADMISSIBLE = 2


@dataclass(frozen=True)
class ConstantRate:
    """Pay at fixed rate d until ruin."""

    d: float


@dataclass(frozen=True)
class Refraction:
    """Pay ``low`` below threshold b and ``high`` at or above it."""

    b: float
    low: float
    high: float


@dataclass(frozen=True)
class TwoCurve:
    """Follow the two-curve policy induced by a solved surface."""

    surface: ValueSurface


@dataclass(frozen=True)
class LumpSumNow:
    """Pay the whole surplus immediately and accept instant ruin."""


StrategySpec = ConstantRate | Refraction | TwoCurve | LumpSumNow


@dataclass
class SimulationResult:
    estimate: float
    std_error: float
    n_paths: int
    mean_ruin_time: float
    fraction_ruined_by_horizon: float
    seed: int
    algorithm: str = ALGORITHM_ID
    strategy: str = ""
    dt: float = 0.0
    horizon: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=float)


@njit(cache=True)
def _ell_grid(x, R, cbar, c_asc, zeta_asc):
    """Largest rate h >= R with the upper curve at or below x on [R, h)."""
    n = len(c_asc)
    j = np.searchsorted(c_asc, R, side="right")
    prev_d = R
    # interpolated upper curve at R
    if j == 0:
        prev_z = zeta_asc[0]
    elif j >= n:
        return cbar
    else:
        t = (R - c_asc[j - 1]) / (c_asc[j] - c_asc[j - 1])
        prev_z = zeta_asc[j - 1] + t * (zeta_asc[j] - zeta_asc[j - 1])
    for k in range(j, n):
        z = zeta_asc[k]
        if z > x:
            if z > prev_z:
                return prev_d + (x - prev_z) / (z - prev_z) * (c_asc[k] - prev_d)
            return prev_d
        prev_d = c_asc[k]
        prev_z = z
    return cbar


@njit(cache=True)
def _interp(c, c_asc, v_asc):
    n = len(c_asc)
    if c <= c_asc[0]:
        return v_asc[0]
    if c >= c_asc[n - 1]:
        return v_asc[n - 1]
    j = np.searchsorted(c_asc, c)
    t = (c - c_asc[j - 1]) / (c_asc[j] - c_asc[j - 1])
    return v_asc[j - 1] + t * (v_asc[j] - v_asc[j - 1])


@njit(cache=True)
def _run_chunk(
    state,
    normals,
    u_ruin,
    dt,
    mu,
    sigma,
    q,
    a,
    cbar,
    mode,
    d_const,
    b_thr,
    low,
    high,
    c_asc,
    gamma_asc,
    zeta_asc,
):
    """Advance one path through a block of normals; state is carried."""
    x, R, pv, df, t, S = state
    sq = sigma * math.sqrt(dt)
    disc = math.exp(-q * dt)
    half = math.exp(-0.5 * q * dt)
    status = _STATUS_LIVE
    for i in range(len(normals)):
        if mode == _MODE_CONSTANT:
            d = d_const
        elif mode == _MODE_REFRACTION:
            d = low if x < b_thr else high
        else:
            if R < cbar and x >= _interp(R, c_asc, zeta_asc):
                R = _ell_grid(x, R, cbar, c_asc, zeta_asc)
            d = a * R if x < _interp(R, c_asc, gamma_asc) else R
        if d > R:
            R = d
        if d < a * R - 1e-9 or d > cbar + 1e-9:
            status = _STATUS_INADMISSIBLE
            break
        pv += df * half * d * dt
        x_prev = x
        x += (mu - d) * dt + sq * normals[i]
        df *= disc
        t += dt
        if x < 0.0:
            status = _STATUS_RUINED
            break
        # in-step ruin: the pinned bridge from x_prev to x crosses zero with
        # probability p = exp(-2 x_prev x / (sigma^2 dt)); the path ruins at
        # the first step where the running survival product prod(1 - p_i)
        # falls below its single uniform threshold
        arg = -2.0 * x_prev * x / (sigma * sigma * dt)
        if arg > -40.0:
            S *= 1.0 - math.exp(arg)
            if S < u_ruin:
                status = _STATUS_RUINED
                t -= 0.5 * dt
                break
    return (x, R, pv, df, t, S), status


def _strategy_args(strategy: StrategySpec, p: ModelParams):
    empty = np.zeros(1)
    if isinstance(strategy, ConstantRate):
        return (_MODE_CONSTANT, strategy.d, 0.0, 0.0, 0.0, empty, empty, empty)
    if isinstance(strategy, Refraction):
        return (
            _MODE_REFRACTION,
            0.0,
            strategy.b,
            strategy.low,
            strategy.high,
            empty,
            empty,
            empty,
        )
    if isinstance(strategy, TwoCurve):
        s = strategy.surface
        return (
            _MODE_TWO_CURVE,
            0.0,
            0.0,
            0.0,
            0.0,
            s._c_asc,
            s._gamma_asc,
            s._zeta_asc,
        )
    raise DomainError(f"unsupported strategy {strategy!r}")


def jump_dividend(R_old: float, R_new: float) -> float:
    """Lump payment on an instantaneous rate increase: always zero."""
    if not R_new > R_old:
        raise DomainError("rate jumps must increase the running max")
    return 0.0


def simulate(
    strategy: StrategySpec,
    x0: float,
    c0: float,
    p: ModelParams,
    dt: float = 1e-3,
    horizon: Optional[float] = None,
    n_paths: int = 100_000,
    seed: int = 0,
) -> SimulationResult:
    """Estimate the expected discounted dividend stream of a strategy."""
    if p.sigma == 0.0:
        raise DegenerateDiffusion("simulation requires sigma > 0")
    if dt <= 0.0:
        raise DomainError("dt must be positive")
    horizon = 3.0 / p.q * math.log(1e3) if horizon is None else horizon
    if math.exp(-p.q * horizon) >= 1e-3:
        raise DomainError(
            f"horizon {horizon} too short: discount truncation above 0.1%"
        )
    if x0 < 0.0:
        raise DomainError("initial surplus must be nonnegative")
    name = type(strategy).__name__
    if isinstance(strategy, LumpSumNow):
        return SimulationResult(
            estimate=x0,
            std_error=0.0,
            n_paths=n_paths,
            mean_ruin_time=0.0,
            fraction_ruined_by_horizon=1.0,
            seed=seed,
            strategy=name,
            dt=dt,
            horizon=horizon,
        )
    mode, d_const, b_thr, low, high, c_asc, g_asc, z_asc = _strategy_args(strategy, p)
    n_steps = int(math.ceil(horizon / dt))
    values = np.empty(n_paths)
    ruin_times = []
    for path in range(n_paths):
        key = (seed << 64) | path
        rng = Generator(Philox(key=key))
        u_ruin = rng.random()
        state = (x0, max(c0, 0.0), 0.0, 1.0, 0.0, 1.0)
        status = _STATUS_LIVE
        done = 0
        while done < n_steps and status == _STATUS_LIVE:
            block = min(CHUNK, n_steps - done)
            normals = rng.standard_normal(block)
            state, status = _run_chunk(
                state,
                normals,
                u_ruin,
                dt,
                p.mu,
                p.sigma,
                p.q,
                p.a,
                p.cbar,
                mode,
                d_const,
                b_thr,
                low,
                high,
                c_asc,
                g_asc,
                z_asc,
            )
            if status == _STATUS_LIVE:
                done += block
            else:
                done = n_steps
        if status == _STATUS_INADMISSIBLE:
            raise InadmissibleRate(
                f"strategy {name} emitted a rate outside [a*R, cbar] on path {path}"
            )
        values[path] = state[2]
        if status == _STATUS_RUINED:
            ruin_times.append(state[4])
    return SimulationResult(
        estimate=float(np.mean(values)),
        std_error=float(np.std(values, ddof=1) / math.sqrt(n_paths)),
        n_paths=n_paths,
        mean_ruin_time=float(np.mean(ruin_times)) if ruin_times else float("nan"),
        fraction_ruined_by_horizon=len(ruin_times) / n_paths,
        seed=seed,
        strategy=name,
        dt=dt,
        horizon=horizon,
    )
