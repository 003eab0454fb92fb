"""Backward integration of the two-curve ODE system and the companion A(c) ODE.

Starting from the ceiling boundary values (b*, z*), the lower curve gamma and
upper curve zeta evolve in the rate variable c via

    gamma'(c) = C10 / C11,
    zeta'(c)  = (C20 C11 - C21 C10) / (C11 C22),

with the algebraic constraint C0(gamma, zeta, c) = 0 re-imposed after each
step by a guarded Newton projection in zeta.  Once the curves are known, the
amplitude A(c) of the increasing basis solution follows from the linear ODE
A' = b0 + b1 A integrated on the same grid.

Large-exponent regime: when E1 = (zeta - gamma) * theta1(c) is large, the
variational system is a singular perturbation -- zeta' is the ratio of two
quantities that are each exponentially small relative to the individual
coefficient terms, below any fixed-precision resolution.  There the solver
keeps the well-conditioned gamma' = C10/C11 and advances zeta with its proven
large-ceiling expansion zeta'(c) = -3 q sigma^4 / (4 c^4), deferring the
constraint projection until the exponent drops back into the resolvable
range, where zeta is re-anchored onto the manifold C0 = 0.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace

import numpy as np

from . import formulas as F
from .boundaries import solve_zstar
from .errors import (
    ConstraintDrift,
    DomainError,
    RegimeError,
    SingularCoefficient,
)
from .formulas import sc_div, sc_float, sc_mul, sc_sub
from .model import ModelParams, amplitude_at_ceiling, optimal_refraction_threshold

#: Exponent (zeta - gamma) * theta1(c) above which the variational zeta'
#: is numerically unresolvable and the large-ceiling expansion takes over.
DEEP_EXPONENT = 18.0
#: Constraint drift tolerance: |C0| <= DRIFT_RTOL * |C22| at accepted nodes.
DRIFT_RTOL = 1e-5
#: Newton projection is skipped when |C22| falls below this guard.
C22_NEWTON_GUARD = 1e-8
#: Newton projection aims well below the drift tolerance (float noise floor
#: of the residual ratio permitting).
NEWTON_TARGET = 1e-9
#: Newton iterations allowed for the per-step projection.
MAX_PROJECTION_STEPS = 4


@dataclass(frozen=True)
class CurvePair:
    """Discretized optimal curves on a descending uniform rate grid.

    ``dgamma``/``dzeta`` store the ODE right-hand sides at each node (used by
    the A-ODE and by downstream c-derivatives).  ``diagnostics`` maps names to
    per-node arrays: signed log-magnitudes of C11 and C22, the post-projection
    residual ratio |C0/C22| (NaN on deep-regime nodes), and a 0/1 deep-regime
    flag.
    """

    c_grid: np.ndarray
    gamma: np.ndarray
    zeta: np.ndarray
    A: np.ndarray
    dgamma: np.ndarray | None = None
    dzeta: np.ndarray | None = None
    diagnostics: dict | None = None
    truncated: bool = False
    c_trunc: float | None = None
    truncation_reason: str | None = None

    def __post_init__(self):
        n = len(self.c_grid)
        if not (len(self.gamma) == len(self.zeta) == len(self.A) == n):
            raise DomainError("curve arrays must share the grid length")
        if n >= 2:
            steps = np.diff(self.c_grid)
            if not np.all(steps < 0):
                raise DomainError("c_grid must be strictly descending")
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
                raise DomainError("c_grid must be uniform")
        if np.any(self.gamma > self.zeta + 1e-9):
            raise DomainError("curve ordering violated: gamma > zeta on the grid")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("c,gamma,zeta,A\n")
        for c, g, z, a in zip(self.c_grid, self.gamma, self.zeta, self.A):
            buf.write(f"{c:.17g},{g:.17g},{z:.17g},{a:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CurvePair":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if not lines or lines[0].strip() != "c,gamma,zeta,A":
            raise DomainError("curve CSV must start with header 'c,gamma,zeta,A'")
        rows = [tuple(float(v) for v in ln.split(",")) for ln in lines[1:]]
        if not rows or any(len(r) != 4 for r in rows):
            raise DomainError("curve CSV rows must have 4 columns")
        arr = np.array(rows, dtype=float)
        return cls(c_grid=arr[:, 0], gamma=arr[:, 1], zeta=arr[:, 2], A=arr[:, 3])


def _is_deep(y: float, z: float, c: float, p: ModelParams) -> bool:
    return (z - y) * F.theta_set(c, p).t1 >= DEEP_EXPONENT


def _deep_coefficients(y: float, z: float, c: float, p: ModelParams):
    """Right-hand sides and diagnostics in the large-exponent regime.

    gamma' = C10/C11 stays well conditioned; zeta' uses the proven
    large-ceiling expansion; C22 is reported from the dominant-family
    (reindexed) numerator, whose magnitude is resolvable.
    """
    th = F.theta_set(c, p)
    d = F.cls_eval(F._cls_d(c, p), y, z, th)
    d2 = sc_mul(d, d)
    C10 = sc_div(F.cls_eval(F._cls_c10_numerator(c, p), y, z, th), d2)
    C11 = sc_div(F.cls_eval(F._cls_c11_numerator(c, p), y, z, th), d2)
    n22 = F._cls_c22_reduced_numerator(c, p)
    C22 = sc_div(F.cls_eval(n22, y, z, th), sc_mul(d2, d))
    dgamma = sc_float(sc_div(C10, C11))
    dzeta = -3.0 * p.q * p.sigma**4 / (4.0 * c**4)
    return dgamma, dzeta, C11, C22


def _full_coefficients(y: float, z: float, c: float, p: ModelParams):
    """Variational right-hand sides where the full system is resolvable."""
    C0, C10, C11, C20, C21, C22 = F.variational_C_scaled(y, z, c, p)
    dgamma = sc_float(sc_div(C10, C11))
    dzeta = sc_float(
        sc_div(sc_sub(sc_mul(C20, C11), sc_mul(C21, C10)), sc_mul(C11, C22))
    )
    return dgamma, dzeta, C11, C22, C0


def _log_mag(sc) -> float:
    """Signed log10 magnitude of a scaled pair: sign * log10|value|."""
    m, s = sc
    if m == 0.0:
        return -math.inf
    return math.copysign(math.log10(abs(m)) + s / math.log(10.0), m)


def _resolve_zeta(y: float, z_hint: float, c: float, p: ModelParams) -> float:
    """Root of C0(y, ., c) = 0 by sign scan plus bisection.

    Used when re-entering the resolvable regime, where the incoming zeta may
    sit far from the constraint manifold; picks the crossing nearest to the
    hint.  Raises ConstraintDrift when the scan finds no crossing.
    """
    th = F.theta_set(c, p)
    n_cls = F._cls_c0_numerator(c, p)
    width = 10.0 * p.mu / p.q
    zs = y + width * np.arange(1, 4001) / 4000.0
    mant, _shift = F.cls_eval(n_cls, y, zs, th)
    signs = np.sign(mant)
    flips = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
    if len(flips) == 0:
        raise ConstraintDrift(
            f"no zero of C0({y:.6g}, ., {c:.6g}) found on re-entry scan"
        )
    mids = 0.5 * (zs[flips] + zs[flips + 1])
    k = int(np.argmin(np.abs(mids - z_hint)))
    lo, hi = float(zs[flips[k]]), float(zs[flips[k] + 1])
    f_lo = float(F.cls_eval(n_cls, y, lo, th)[0])
    for _ in range(200):
        if hi - lo <= 1e-12 * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        f_mid = float(F.cls_eval(n_cls, y, mid, th)[0])
        if f_mid == 0.0:
            return mid
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _project_zeta(y: float, z: float, c: float, p: ModelParams, max_steps: int):
    """Newton steps in zeta toward C0(y, zeta, c) = 0.

    Returns (zeta, residual_ratio).  Skipped (returning the input) when C22
    is below the guard.  Raises ConstraintDrift when Newton fails to reach
    the drift tolerance within ``max_steps``.
    """
    th = F.theta_set(c, p)
    n_cls = F._cls_c0_numerator(c, p)
    _n21, n22_cls = F._cls_c21_c22_numerators(c, p)
    d_cls = F._cls_d(c, p)

    def resid(zz):
        d = F.cls_eval(d_cls, y, zz, th)
        d2 = sc_mul(d, d)
        C0 = sc_div(F.cls_eval(n_cls, y, zz, th), d2)
        C22 = sc_div(F.cls_eval(n22_cls, y, zz, th), sc_mul(d2, d))
        return C0, C22

    C0, C22 = resid(z)
    if abs(sc_float(C22)) < C22_NEWTON_GUARD:
        ratio = abs(sc_float(sc_div(C0, C22))) if C22[0] != 0.0 else math.inf
        return z, ratio
    ratio = abs(sc_float(sc_div(C0, C22)))
    best = z, ratio
    for _ in range(max_steps):
        if ratio <= NEWTON_TARGET:
            return z, ratio
        step = -sc_float(sc_div(C0, C22))
        if not math.isfinite(step):
            break
        z = z + step
        C0, C22 = resid(z)
        if C22[0] == 0.0:
            break
        ratio = abs(sc_float(sc_div(C0, C22)))
        if ratio < best[1]:
            best = z, ratio
    z, ratio = best
    if ratio <= DRIFT_RTOL:
        return z, ratio
    raise ConstraintDrift(
        f"Newton projection onto C0=0 stalled at c={c:.6g}: "
        f"|C0/C22| = {ratio:.3e} after {max_steps} steps"
    )


def solve_curves(
    p: ModelParams,
    n_steps: int = 2000,
    stepper: str = "euler",
    c_low: float = 0.0,
) -> CurvePair:
    """Integrate the two-curve system backward from c = cbar to c_low.

    Explicit Euler by default, Heun ("heun") as the second-order option.
    Stops early with a truncated grid when C11 or C22 vanishes or changes
    sign, or when the curve ordering gamma <= zeta fails; the returned pair
    then covers [c_trunc, cbar] only.
    """
    if stepper not in ("euler", "heun"):
        raise DomainError(f"unknown stepper {stepper!r}")
    if not p.interesting_regime:
        raise RegimeError("curve integration requires the interesting regime")
    if not 0.0 <= c_low < p.cbar:
        raise DomainError(f"need 0 <= c_low < cbar, got c_low={c_low}")
    b = optimal_refraction_threshold(p)
    z = solve_zstar(p, bstar=b)
    cs = np.linspace(p.cbar, c_low, n_steps + 1)
    gamma = np.full(n_steps + 1, np.nan)
    zeta = np.full(n_steps + 1, np.nan)
    dgamma = np.full(n_steps + 1, np.nan)
    dzeta = np.full(n_steps + 1, np.nan)
    log_c11 = np.full(n_steps + 1, np.nan)
    log_c22 = np.full(n_steps + 1, np.nan)
    resid = np.full(n_steps + 1, np.nan)
    deep_flag = np.zeros(n_steps + 1)

    y_cur, z_cur = b, z
    sign_c11 = sign_c22 = 0.0
    was_deep = False
    truncated = False
    reason = None
    last = n_steps
    for i, c in enumerate(cs):
        if c == 0.0:
            # Both admissible rates collapse at c = 0 and the auxiliary
            # denominator vanishes identically; record the stepped state and
            # carry the one-sided right-hand sides from the previous node.
            gamma[i], zeta[i] = y_cur, z_cur
            if i > 0:
                dgamma[i], dzeta[i] = dgamma[i - 1], dzeta[i - 1]
                deep_flag[i] = deep_flag[i - 1]
            break
        try:
            deep = _is_deep(y_cur, z_cur, c, p)
            if deep:
                # The fine structure that keeps gamma on the ODE's invariant
                # manifold is exponentially repulsive and below float
                # resolution; the manifold itself is the refraction-threshold
                # curve, so gamma is pinned to it directly.
                if i > 0:
                    y_cur = optimal_refraction_threshold(
                        ModelParams(mu=p.mu, sigma=p.sigma, q=p.q, a=p.a, cbar=c)
                    )
                gp, zp, C11, C22 = _deep_coefficients(y_cur, z_cur, c, p)
                C0 = None
            else:
                if was_deep:
                    # regime switch: re-anchor zeta onto the now-resolvable
                    # constraint manifold
                    z_cur = _resolve_zeta(y_cur, z_cur, c, p)
                elif i > 0:
                    z_cur, resid[i] = _project_zeta(
                        y_cur, z_cur, c, p, MAX_PROJECTION_STEPS
                    )
                gp, zp, C11, C22, C0 = _full_coefficients(y_cur, z_cur, c, p)
                if was_deep and C22[0] != 0.0:
                    resid[i] = abs(sc_float(sc_div(C0, C22)))
        except (ConstraintDrift, SingularCoefficient) as exc:
            if i == 0:
                raise
            truncated, reason, last = True, str(exc), i - 1
            break
        m11, m22 = C11[0], C22[0]
        singular = (
            m11 == 0.0
            or (sign_c11 and math.copysign(1, m11) != sign_c11)
            or (not deep and m22 == 0.0)
            or (sign_c22 and not deep and math.copysign(1, m22) != sign_c22)
        )
        if singular:
            if i == 0:
                raise SingularCoefficient(
                    f"C11 or C22 singular at the ceiling c={c:.6g}", c_trunc=c
                )
            truncated, reason, last = True, f"C11 or C22 crossed zero at c={c:.6g}", i - 1
            break
        if y_cur > z_cur:
            truncated, reason, last = True, f"curve ordering failed at c={c:.6g}", i - 1
            break
        sign_c11 = math.copysign(1, m11)
        if not deep:
            sign_c22 = math.copysign(1, m22)
        was_deep = deep
        gamma[i], zeta[i] = y_cur, z_cur
        dgamma[i], dzeta[i] = gp, zp
        log_c11[i], log_c22[i] = _log_mag(C11), _log_mag(C22)
        deep_flag[i] = 1.0 if deep else 0.0
        if i == n_steps:
            break
        dc = cs[i + 1] - cs[i]
        if stepper == "euler" or cs[i + 1] == 0.0 or deep:
            y_next, z_next = y_cur + dc * gp, z_cur + dc * zp
        else:
            y_pred, z_pred = y_cur + dc * gp, z_cur + dc * zp
            if _is_deep(y_pred, z_pred, cs[i + 1], p):
                y_cur, z_cur = y_pred, z_pred
                continue
            try:
                gp2, zp2, _, _, _ = _full_coefficients(y_pred, z_pred, cs[i + 1], p)
            except (ConstraintDrift, SingularCoefficient) as exc:
                truncated, reason, last = True, str(exc), i
                break
            y_next = y_cur + dc * 0.5 * (gp + gp2)
            z_next = z_cur + dc * 0.5 * (zp + zp2)
        y_cur, z_cur = y_next, z_next

    sl = slice(0, last + 1)
    diagnostics = {
        "log10_C11": log_c11[sl],
        "log10_C22": log_c22[sl],
        "c0_residual": resid[sl],
        "deep": deep_flag[sl],
    }
    return CurvePair(
        c_grid=cs[sl],
        gamma=gamma[sl],
        zeta=zeta[sl],
        A=np.full(last + 1, np.nan),
        dgamma=dgamma[sl],
        dzeta=dzeta[sl],
        diagnostics=diagnostics,
        truncated=truncated,
        c_trunc=float(cs[last]) if truncated else None,
        truncation_reason=reason,
    )


def solve_A(p: ModelParams, curves: CurvePair, stepper: str = "euler") -> CurvePair:
    """Fill CurvePair.A from the linear ODE A' = b0 + b1 A, backward from the
    ceiling.

    The slope argument w of the auxiliary pair is the stored ODE right-hand
    side dgamma, not a grid difference.  On deep-regime nodes b1 is large and
    negative, so the backward direction is anti-stable and A is a slaved
    quasi-static mode; those nodes take the closed-form slaved value
    -b0/b1 - (d/dc)(-b0/b1)/b1 instead of an integration step.
    """
    if curves.dgamma is None:
        raise DomainError("curves lack stored right-hand sides; re-solve them")
    if stepper not in ("euler", "heun"):
        raise DomainError(f"unknown stepper {stepper!r}")
    cs = curves.c_grid
    n = len(cs)
    A = np.full(n, np.nan)
    A[0] = amplitude_at_ceiling(p, curves.gamma[0])
    deep = (
        curves.diagnostics["deep"].astype(bool)
        if curves.diagnostics is not None
        else np.zeros(n, dtype=bool)
    )

    pair = [None] * n

    def aux(i):
        if pair[i] is None:
            pair[i] = F.aux_b(
                curves.gamma[i], curves.zeta[i], curves.dgamma[i], cs[i], p
            )
        return pair[i]

    def rhs(i, a):
        b0, b1 = aux(i)
        return b0 + b1 * a

    slaved = np.full(n, np.nan)
    idx = np.nonzero(deep)[0]
    if len(idx) and cs[idx[-1]] == 0.0:
        idx = idx[:-1]
    if len(idx):
        vals = np.array([-aux(i)[0] / aux(i)[1] for i in idx])
        if len(idx) >= 2:
            dvals = np.gradient(vals, cs[idx])
        else:
            dvals = np.zeros(1)
        for k, i in enumerate(idx):
            slaved[i] = vals[k] - dvals[k] / aux(i)[1]

    for i in range(1, n):
        if deep[i] and not math.isnan(slaved[i]):
            A[i] = slaved[i]
            continue
        dc = cs[i] - cs[i - 1]
        f0 = rhs(i - 1, A[i - 1])
        if stepper == "euler" or cs[i] == 0.0 or deep[i]:
            A[i] = A[i - 1] + dc * f0
        else:
            pred = A[i - 1] + dc * f0
            A[i] = A[i - 1] + dc * 0.5 * (f0 + rhs(i, pred))
    return replace(curves, A=A)
