"""Grid verification that the assembled surface satisfies the sufficient
optimality conditions: both generator residuals and the rate-derivative are
nonpositive everywhere, with equality on the matching regions, plus the
smooth-pasting and marginal-value conditions along the lower curve.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError
from .model import ModelParams
from .surface import (
    REGION_LOW,
    ValueSurface,
    eval_partials,
    eval_value,
    lookup_ell,
    region_of,
)


@dataclass(frozen=True)
class GridSpec:
    """Rectangular verification grid over surplus and rate."""

    n_x: int = 400
    n_c: int = 200
    x_max: float | None = None  # default 3 * zeta(cbar)

    def axes(self, s: ValueSurface) -> tuple[np.ndarray, np.ndarray]:
        x_max = 3.0 * s.zeta(s.cbar) if self.x_max is None else self.x_max
        xs = np.linspace(0.0, x_max, self.n_x)
        cs = np.linspace(s.c_min, s.cbar, self.n_c)
        return xs, cs


@dataclass
class VerificationReport:
    """Most-positive residuals and pasting gaps; pass iff all within tolerance."""

    max_residual_Lc: float = -np.inf
    max_residual_Lac: float = -np.inf
    max_Wc: float = -np.inf
    smooth_pasting_gap: float = 0.0
    wxx_jump_gap: float = 0.0
    max_wc_on_upper_curve: float = 0.0
    monotonicity_violations: int = 0
    residual_tol: float = 0.0
    pasting_tol: float = 1e-5
    wc_curve_tol: float = 1e-4
    locations: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    passed: bool = False

    def finalize(self) -> "VerificationReport":
        self.passed = (
            self.max_residual_Lc <= self.residual_tol
            and self.max_residual_Lac <= self.residual_tol
            and self.max_Wc <= self.residual_tol
            and self.smooth_pasting_gap <= self.pasting_tol
            and self.wxx_jump_gap <= self.pasting_tol
            and self.max_wc_on_upper_curve <= self.wc_curve_tol
            and self.monotonicity_violations == 0
        )
        return self

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, indent=2, default=float)


def _residuals(s: ValueSurface, x: float, c: float):
    """Both generator residuals and Wc at one state, from analytic partials."""
    p = s.params
    W = eval_value(s, x, c)
    wx, wxx, wc = eval_partials(s, x, c)
    half_s2 = 0.5 * p.sigma**2
    Lc = half_s2 * wxx + (p.mu - c) * wx - p.q * W + c
    Lac = half_s2 * wxx + (p.mu - p.a * c) * wx - p.q * W + p.a * c
    return Lc, Lac, wc


def check_supersolution(
    s: ValueSurface, grid: GridSpec | None = None, tol: float | None = None
) -> VerificationReport:
    """Evaluate the three variational-inequality components on the grid.

    The most-positive value of each is reported; pass requires all of them at
    or below ``tol`` (default 1e-5 * cbar).
    """
    grid = grid or GridSpec()
    tol = 1e-5 * s.cbar if tol is None else tol
    xs, cs = grid.axes(s)
    rep = VerificationReport(residual_tol=tol)
    rep.grid = {
        "n_x": grid.n_x,
        "n_c": grid.n_c,
        "x_max": float(xs[-1]),
        "c_range": [float(cs[0]), float(cs[-1])],
    }
    for c in cs:
        prev = None
        for x in xs:
            Lc, Lac, wc = _residuals(s, float(x), float(c))
            if Lc > rep.max_residual_Lc:
                rep.max_residual_Lc = float(Lc)
                rep.locations["Lc"] = [float(x), float(c)]
            if Lac > rep.max_residual_Lac:
                rep.max_residual_Lac = float(Lac)
                rep.locations["Lac"] = [float(x), float(c)]
            if wc > rep.max_Wc:
                rep.max_Wc = float(wc)
                rep.locations["Wc"] = [float(x), float(c)]
            W = eval_value(s, float(x), float(c))
            if prev is not None and W < prev - tol:
                rep.monotonicity_violations += 1
            prev = W
    _pasting_checks(s, cs, rep)
    return rep.finalize()


def _pasting_checks(s: ValueSurface, cs: np.ndarray, rep: VerificationReport) -> None:
    eps = 1e-9
    for c in cs:
        if c <= 0.0:
            continue
        g, z = s.gamma(float(c)), s.zeta(float(c))
        lo = eval_partials(s, g, float(c), side="low")
        mi = eval_partials(s, g, float(c), side="mid")
        rep.smooth_pasting_gap = max(
            rep.smooth_pasting_gap, abs(lo[0] - 1.0), abs(mi[0] - 1.0)
        )
        rep.wxx_jump_gap = max(
            rep.wxx_jump_gap, abs(lo[1] - mi[1]) / max(1e-12, abs(mi[1]))
        )
        wc = eval_partials(s, z * (1.0 - eps), float(c))[2]
        rep.max_wc_on_upper_curve = max(rep.max_wc_on_upper_curve, abs(wc))


def check_marginal_conditions(
    s: ValueSurface, tol: float = 1e-5, n_x: int = 200, n_c: int = 100
) -> VerificationReport:
    """Check Wx >= 1 below the lower curve and Wx <= 1 between the curves."""
    cs = np.linspace(max(s.c_min, 1e-6), s.cbar, n_c)
    rep = VerificationReport(residual_tol=0.0, pasting_tol=tol)
    rep.max_residual_Lc = rep.max_residual_Lac = rep.max_Wc = -np.inf
    for c in cs:
        g, z = s.gamma(float(c)), s.zeta(float(c))
        for x in np.linspace(1e-6, z * (1 - 1e-9), n_x):
            wx = eval_partials(s, float(x), float(c))[0]
            low = region_of(s, float(x), float(c)) == REGION_LOW
            if low and wx < 1.0 - tol:
                rep.monotonicity_violations += 1
                rep.locations.setdefault("marginal_low", [float(x), float(c)])
            if not low and wx > 1.0 + tol:
                rep.monotonicity_violations += 1
                rep.locations.setdefault("marginal_mid", [float(x), float(c)])
        lo = eval_partials(s, g, float(c), side="low")
        rep.smooth_pasting_gap = max(rep.smooth_pasting_gap, abs(lo[0] - 1.0))
    rep.grid = {"n_x": n_x, "n_c": n_c}
    return rep.finalize()


def check_degenerate_ceiling(p: ModelParams, n_x: int = 400, tol: float = 1e-9) -> bool:
    """Verify the closed-form optimum of the uninteresting regime.

    When the ceiling is at or below q sigma^2/(2 mu) the optimal value is the
    single-exponential U(x) = (cbar/q)(1 - e^{theta2(cbar) x}), which must
    satisfy the variational inequality with equality in the generator at the
    ceiling rate.
    """
    from .model import characteristic_roots

    if p.interesting_regime:
        raise DomainError("degenerate check applies only to the small-ceiling regime")
    t2 = characteristic_roots(p.cbar, p).theta2
    xs = np.linspace(0.0, 5.0 * p.mu / p.q, n_x)
    U = p.cbar / p.q * (1.0 - np.exp(t2 * xs))
    Ux = -p.cbar / p.q * t2 * np.exp(t2 * xs)
    Uxx = -p.cbar / p.q * t2 * t2 * np.exp(t2 * xs)
    L = 0.5 * p.sigma**2 * Uxx + (p.mu - p.cbar) * Ux - p.q * U + p.cbar
    # generator equality at the top rate; any lower rate d gives
    # L^d = (cbar - d)(Ux - 1), nonpositive iff Ux <= 1
    return bool(np.max(np.abs(L)) <= tol * p.cbar and np.all(Ux <= 1.0 + 1e-12))
