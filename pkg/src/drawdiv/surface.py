"""Candidate value surface assembled from the solved curve pair.

The surface W(x, c) is piecewise closed-form: below the lower curve the
reduced-rate basis applies, between the curves the current-rate basis, and at
or above the upper curve the state jumps to the largest reachable rate whose
upper curve stays below the surplus, where the same closed form is evaluated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import formulas as F
from .curves import CurvePair
from .errors import DomainError, QueryBelowTruncation
from .model import ModelParams

#: Region labels used in exports and PolicyAction mapping.
REGION_LOW = "pay_reduced"
REGION_MID = "pay_current"
REGION_JUMP = "jump"


@dataclass(frozen=True)
class PolicyAction:
    """Action prescribed by the two-curve policy at a state (x, c).

    kind is one of "pay_reduced" (rate a*c), "pay_current" (rate c) or
    "jump" (raise the running max to target, then pay at the new current
    rate).
    """

    kind: Literal["pay_reduced", "pay_current", "jump"]
    rate: float | None = None
    target: float | None = None

    def __post_init__(self):
        if self.kind == "jump":
            if self.target is None:
                raise DomainError("jump action requires a target rate")
        elif self.rate is None:
            raise DomainError(f"{self.kind} action requires a rate")


@dataclass(frozen=True)
class ValueSurface:
    """Immutable evaluator for the assembled candidate value function."""

    params: ModelParams
    curves: CurvePair
    # ascending-in-c views for interpolation
    _c_asc: np.ndarray = field(repr=False)
    _gamma_asc: np.ndarray = field(repr=False)
    _zeta_asc: np.ndarray = field(repr=False)
    _A_asc: np.ndarray = field(repr=False)
    _Arhs_asc: np.ndarray = field(repr=False)
    _dgamma_asc: np.ndarray = field(repr=False)
    zeta_max: float = 0.0
    c_min: float = 0.0

    @property
    def cbar(self) -> float:
        return self.params.cbar

    def gamma(self, c: float) -> float:
        return float(np.interp(c, self._c_asc, self._gamma_asc))

    def zeta(self, c: float) -> float:
        return float(np.interp(c, self._c_asc, self._zeta_asc))

    def A(self, c: float) -> float:
        return float(np.interp(c, self._c_asc, self._A_asc))

    def A_prime(self, c: float) -> float:
        """dA/dc interpolated from the stored ODE right-hand side."""
        return float(np.interp(c, self._c_asc, self._Arhs_asc))

    def gamma_prime(self, c: float) -> float:
        """dgamma/dc interpolated from the stored ODE right-hand side."""
        return float(np.interp(c, self._c_asc, self._dgamma_asc))

    def _check_query(self, x, c: float) -> None:
        if np.any(np.asarray(x) < 0.0):
            raise DomainError("surplus must be nonnegative")
        if c < self.c_min - 1e-12:
            raise QueryBelowTruncation(
                f"rate {c} below the solved range [{self.c_min}, {self.cbar}]"
            )
        if c > self.cbar + 1e-12:
            raise DomainError(f"rate {c} above the ceiling {self.cbar}")


def build_surface(p: ModelParams, curves: CurvePair) -> ValueSurface:
    """Assemble an immutable surface from solved curves (A filled in)."""
    if curves.A is None or not np.all(np.isfinite(curves.A)):
        raise DomainError("curves lack a finite amplitude column; run the A solve")
    cs = curves.c_grid
    order = np.argsort(cs)
    c_asc = cs[order]
    gamma_asc = curves.gamma[order]
    zeta_asc = curves.zeta[order]
    A_asc = curves.A[order]
    if curves.dgamma is not None:
        dgamma_asc = curves.dgamma[order]
    else:
        # curves reloaded from CSV carry no stored right-hand sides; the
        # lower curve is smooth along the grid, so a grid gradient recovers
        # gamma' to second order
        dgamma_asc = np.gradient(gamma_asc, c_asc)
    # A' from the linear ODE right-hand side at each node; the c = 0 node is
    # representationally singular (both rates vanish), so it copies its
    # neighbour.
    arhs = np.empty_like(A_asc)
    for k, c in enumerate(c_asc):
        if c == 0.0:
            arhs[k] = np.nan
            continue
        b0, b1 = F.aux_b(gamma_asc[k], zeta_asc[k], dgamma_asc[k], float(c), p)
        arhs[k] = b0 + b1 * A_asc[k]
    if np.isnan(arhs[0]):
        arhs[0] = arhs[1]
    return ValueSurface(
        params=p,
        curves=curves,
        _c_asc=c_asc,
        _gamma_asc=gamma_asc,
        _zeta_asc=zeta_asc,
        _A_asc=A_asc,
        _Arhs_asc=arhs,
        _dgamma_asc=dgamma_asc,
        zeta_max=float(np.max(zeta_asc)),
        c_min=float(c_asc[0]),
    )


def _eval_H(s: ValueSurface, x, c: float):
    """No-change-region closed form H(x, c) for scalar c, broadcasting x."""
    y = s.gamma(c)
    A = s.A(c)
    f10, f11, f20, f21 = F.basis_f(y, x, c, s.params)
    low = f10 + f11 * A
    mid = f20 + f21 * A
    return np.where(np.asarray(x) < y, low, mid)


def lookup_ell(s: ValueSurface, x: float, c: float) -> float:
    """Largest rate h >= c whose upper curve stays at or below x on [c, h)."""
    s._check_query(x, c)
    zc = s.zeta(c)
    if x < zc:
        raise DomainError(f"jump target undefined: x={x} below the upper curve {zc}")
    i0 = int(np.searchsorted(s._c_asc, c, side="right"))
    if i0 >= len(s._c_asc):
        return s.cbar
    zs = s._zeta_asc[i0:]
    ds = s._c_asc[i0:]
    run_max = np.maximum.accumulate(zs)
    k = int(np.searchsorted(run_max, x, side="right"))
    if k >= len(ds):
        return s.cbar
    # first violating node ds[k]; interpolate the crossing from the previous
    # admissible point (a grid node, or c itself)
    d_lo, z_lo = (ds[k - 1], zs[k - 1]) if k > 0 else (c, zc)
    d_hi, z_hi = ds[k], zs[k]
    if z_hi <= z_lo:  # violation came from the running max, not a local rise
        return float(d_lo)
    t = (x - z_lo) / (z_hi - z_lo)
    return float(d_lo + t * (d_hi - d_lo))


def eval_value(s: ValueSurface, x: float, c: float) -> float:
    """Candidate value W(x, c)."""
    s._check_query(x, c)
    if x == 0.0:
        return 0.0
    if x < s.zeta(c):
        return float(_eval_H(s, x, c))
    return float(_eval_H(s, x, lookup_ell(s, x, c)))


def eval_partials(
    s: ValueSurface, x: float, c: float, side: Literal["auto", "low", "mid"] = "auto"
) -> tuple[float, float, float]:
    """Analytic (Wx, Wxx, Wc) of the active closed-form branch.

    ``side`` selects the branch when x sits exactly on the lower curve:
    "low" forces the reduced-rate branch, "mid" the current-rate branch;
    "auto" uses the region classifier (x < gamma(c) -> low).  In the jump
    region the evaluation rate is frozen at the jump target, so Wc = 0 by
    construction.
    """
    s._check_query(x, c)
    p = s.params
    if x >= s.zeta(c):
        h = lookup_ell(s, x, c)
        y = s.gamma(h)
        A = s.A(h)
        pt = F.basis_f_partials(y, x, h, p)
        if x < y:
            return (
                float(pt["f10_x"] + pt["f11_x"] * A),
                float(pt["f10_xx"] + pt["f11_xx"] * A),
                0.0,
            )
        return (
            float(pt["f20_x"] + pt["f21_x"] * A),
            float(pt["f20_xx"] + pt["f21_xx"] * A),
            0.0,
        )
    y = s.gamma(c)
    A = s.A(c)
    Ap = s.A_prime(c)
    gp = s.gamma_prime(c)
    pt = F.basis_f_partials(y, x, c, p)
    use_low = x < y if side == "auto" else side == "low"
    if use_low:
        f10, f11, _f20, _f21 = F.basis_f(y, x, c, p)
        wx = pt["f10_x"] + pt["f11_x"] * A
        wxx = pt["f10_xx"] + pt["f11_xx"] * A
        wc = pt["f10_c"] + pt["f11_c"] * A + f11 * Ap
    else:
        _f10, _f11, f20, f21 = F.basis_f(y, x, c, p)
        sh = F.basis_shift_partials(y, x, c, p)
        wx = pt["f20_x"] + pt["f21_x"] * A
        wxx = pt["f20_xx"] + pt["f21_xx"] * A
        wc = (
            sh["f20_c"]
            + sh["f20_y"] * gp
            + (sh["f21_c"] + sh["f21_y"] * gp) * A
            + f21 * Ap
        )
    return float(wx), float(wxx), float(wc)


def region_of(s: ValueSurface, x: float, c: float) -> str:
    s._check_query(x, c)
    if x >= s.zeta(c):
        return REGION_JUMP
    return REGION_LOW if x < s.gamma(c) else REGION_MID


def policy_action(s: ValueSurface, x: float, c: float) -> PolicyAction:
    """Map a state to the prescribed dividend action."""
    reg = region_of(s, x, c)
    if reg == REGION_LOW:
        return PolicyAction(kind=REGION_LOW, rate=s.params.a * c)
    if reg == REGION_MID:
        return PolicyAction(kind=REGION_MID, rate=c)
    h = lookup_ell(s, x, c)
    if h <= c:
        return PolicyAction(kind=REGION_MID, rate=c)
    return PolicyAction(kind=REGION_JUMP, target=h)


def export_grid(
    s: ValueSurface, path: str, x_grid: np.ndarray, c_grid: np.ndarray
) -> None:
    """Write `x,c,W,Wx,Wxx,Wc,region` rows at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "c", "W", "Wx", "Wxx", "Wc", "region"])
        for c in c_grid:
            for x in x_grid:
                val = eval_value(s, float(x), float(c))
                wx, wxx, wc = eval_partials(s, float(x), float(c))
                w.writerow(
                    [f"{v:.17g}" for v in (x, c, val, wx, wxx, wc)]
                    + [region_of(s, float(x), float(c))]
                )
