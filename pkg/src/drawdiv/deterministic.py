"""Zero-volatility sandbox: exact closed forms for the drawdown payout.

With sigma = 0 the surplus moves deterministically, so the value of paying the
ceiling rate down to a switch level and the reduced rate afterwards is an
elementary two-phase discounted integral.  These formulas serve as exact
oracles for the diffusive solver's limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, RegimeError


@dataclass(frozen=True)
class DetParams:
    """Deterministic problem instance (sigma fixed at 0); requires cbar > mu
    so that paying at the ceiling depletes the surplus."""

    mu: float
    q: float
    a: float
    cbar: float

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"mu must be positive, got {self.mu}")
        if not self.q > 0:
            raise DomainError(f"q must be positive, got {self.q}")
        if not 0 < self.a < 1:
            raise DomainError(f"a must lie in (0, 1), got {self.a}")
        if not self.cbar > self.mu:
            raise DomainError(f"cbar must exceed mu, got cbar={self.cbar}, mu={self.mu}")


def det_refraction_value(x: float, b: float, dp: DetParams) -> float:
    """Discounted dividends of paying cbar from ``x`` down to ``b``, then
    a*cbar until ruin (or forever when a*cbar <= mu keeps the surplus up)."""
    if b < 0 or x < b:
        raise DomainError(f"need x >= b >= 0, got x={x}, b={b}")
    low = dp.a * dp.cbar
    t_switch = (x - b) / (dp.cbar - dp.mu)
    discount = math.exp(-dp.q * t_switch)
    high_phase = dp.cbar / dp.q * (1.0 - discount)
    if low > dp.mu:
        low_phase = low / dp.q * (1.0 - math.exp(-dp.q * b / (low - dp.mu)))
    else:
        # Reduced rate no longer depletes the surplus: the low phase pays
        # forever (continuous limit of the depleting branch).
        low_phase = low / dp.q
    return high_phase + discount * low_phase


def det_optimal_b(dp: DetParams) -> float:
    """Optimal switch level for the deterministic refraction payout."""
    low = dp.a * dp.cbar
    if low <= dp.mu:
        raise RegimeError(
            f"a*cbar = {low} <= mu = {dp.mu}: no interior optimal switch level"
        )
    return (low - dp.mu) / dp.q * math.log(low / (low - dp.mu))


def det_indifference_x(dp: DetParams) -> float:
    """Surplus level at which taking the money now matches the refraction
    payout in the large-ceiling limit."""
    return dp.mu / dp.q * (1.0 + 1.0 / math.sqrt(dp.a))
