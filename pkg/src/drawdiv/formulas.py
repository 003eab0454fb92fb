"""Closed-form auxiliary functions of the two-curve free-boundary system.

Every function here is a finite sum of terms

    coeff * y**r * (z - y)**p * exp(alpha*E1 + beta*E2 + m*F1 + n*F2)

with E1 = (z-y)*theta1(c), E2 = (z-y)*theta2(c), F1 = y*theta1(a*c),
F2 = y*theta2(a*c) and small integer multipliers.  The module keeps that
structure explicit: terms live in a dictionary keyed by the integer exponent
tuple, numeric coefficients are summed per class, and classes whose
coefficients cancel identically (to accumulated rounding) are flushed to
exact zero.  Products and the d/dy, d/dz derivatives are formed mechanically
in class space, so the combinations that are exponentially smaller than their
individual terms (the variational coefficients at large rate ceilings) are
still evaluated with full relative accuracy.  Final evaluation is done in
log-shifted form, returning (mantissa, shift) pairs with value =
mantissa * exp(shift).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import OverflowGuard, StepCollapse
from .model import EXP_CLAMP, ModelParams

# Relative threshold below which a class coefficient is treated as an exact
# analytic cancellation and flushed to zero.
FLUSH_RTOL = 1e-11


@dataclass(frozen=True)
class ThetaSet:
    """Characteristic roots at rates c and a*c with their rate-derivatives."""

    t1: float
    t2: float
    T1: float
    T2: float
    t1p: float
    t2p: float
    T1p: float
    T2p: float
    c: float


def _roots(d: float, p: ModelParams) -> tuple[float, float, float, float]:
    s2 = p.sigma**2
    b = d - p.mu
    disc = math.sqrt(b * b + 2 * p.q * s2)
    product = -2 * p.q / s2
    if b >= 0:
        t1 = (b + disc) / s2
        t2 = product / t1
    else:
        t2 = (b - disc) / s2
        t1 = product / t2
    return t1, t2, (1 + b / disc) / s2, (1 - b / disc) / s2


def theta_set(c: float, p: ModelParams) -> ThetaSet:
    t1, t2, t1p, t2p = _roots(c, p)
    T1, T2, T1p, T2p = _roots(p.a * c, p)
    return ThetaSet(t1=t1, t2=t2, T1=T1, T2=T2, t1p=t1p, t2p=t2p, T1p=T1p, T2p=T2p, c=c)


# ---------------------------------------------------------------------------
# Exponent-class algebra.  A "Cls" maps (alpha, beta, m, n, p, r) to
# (coefficient, magnitude), where magnitude is a conservative running sum of
# the absolute contributions (used to detect identical cancellations).
# ---------------------------------------------------------------------------


def _add(cls: dict, key: tuple, val: float) -> None:
    cur = cls.get(key)
    if cur is None:
        cls[key] = (val, abs(val))
    else:
        cls[key] = (cur[0] + val, cur[1] + abs(val))


def _flush(cls: dict) -> dict:
    out = {}
    for key, (val, mag) in cls.items():
        if val != 0.0 and abs(val) > FLUSH_RTOL * mag:
            out[key] = (val, mag)
    return out


def cls_scale(cls: dict, factor: float) -> dict:
    return {k: (v * factor, m * abs(factor)) for k, (v, m) in cls.items()}


def cls_add(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, (v, m) in b.items():
        cur = out.get(k)
        if cur is None:
            out[k] = (v, m)
        else:
            out[k] = (cur[0] + v, cur[1] + m)
    return _flush(out)


def cls_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for (a1, b1, m1, n1, p1, r1), (va, ma) in a.items():
        for (a2, b2, m2, n2, p2, r2), (vb, mb) in b.items():
            key = (a1 + a2, b1 + b2, m1 + m2, n1 + n2, p1 + p2, r1 + r2)
            cur = out.get(key)
            if cur is None:
                out[key] = (va * vb, ma * mb)
            else:
                out[key] = (cur[0] + va * vb, cur[1] + ma * mb)
    return _flush(out)


def cls_dz(cls: dict, th: ThetaSet) -> dict:
    """Exact d/dz in class space (z enters via (z-y)^p and the E exponents)."""
    out: dict = {}
    for (al, be, m, n, p, r), (v, mag) in cls.items():
        if p > 0:
            _add(out, (al, be, m, n, p - 1, r), v * p)
        slope = al * th.t1 + be * th.t2
        if slope != 0.0:
            _add(out, (al, be, m, n, p, r), v * slope)
    return _flush(out)


def cls_dy(cls: dict, th: ThetaSet) -> dict:
    """Exact d/dy in class space (y enters via y^r, (z-y)^p and all four
    exponent slots)."""
    out: dict = {}
    for (al, be, m, n, p, r), (v, mag) in cls.items():
        if p > 0:
            _add(out, (al, be, m, n, p - 1, r), -v * p)
        if r > 0:
            _add(out, (al, be, m, n, p, r - 1), v * r)
        slope = -al * th.t1 - be * th.t2 + m * th.T1 + n * th.T2
        if slope != 0.0:
            _add(out, (al, be, m, n, p, r), v * slope)
    return _flush(out)


def cls_dc(builder, c: float, p: ModelParams) -> dict:
    """d/dc of a class-valued builder ``(c, p) -> dict``, in class space.

    The c-derivative of ``coeff * y^r (z-y)^p exp(a E1 + b E2 + m F1 + n F2)``
    splits into the exponent chain terms, which are exact in class space (E
    slopes raise the (z-y) power, F slopes raise the y power, each with the
    corresponding root rate-derivative as factor), and the coefficient
    derivative.  The coefficients are smooth rational-algebraic functions of c
    with O(1/c) log-derivatives, so a wide 4th-order stencil resolves them to
    near machine precision; differencing the assembled evaluation instead
    would divide the evaluation's cancellation noise floor by the step and
    lose the derivative entirely once the exponent spread is large.
    """
    th = theta_set(c, p)
    base = builder(c, p)
    h = 1e-3 * max(1.0, abs(c))
    stencil = {k: builder(c + k * h, p) for k in (-2, -1, 1, 2)}
    out: dict = {}
    for key, (v, _mag) in base.items():
        al, be, m, n, pw, r = key
        vals = [stencil[k].get(key, (0.0, 0.0))[0] for k in (-2, -1, 1, 2)]
        dv = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h)
        if dv != 0.0:
            _add(out, key, dv)
        e_slope = al * th.t1p + be * th.t2p
        if e_slope != 0.0:
            _add(out, (al, be, m, n, pw + 1, r), v * e_slope)
        f_slope = p.a * (m * th.T1p + n * th.T2p)
        if f_slope != 0.0:
            _add(out, (al, be, m, n, pw, r + 1), v * f_slope)
    return _flush(out)


def cls_eval(cls: dict, y, z, th: ThetaSet):
    """Evaluate a class dictionary at (y, z); broadcasts over numpy arrays.

    Returns (mantissa, shift) with value = mantissa * exp(shift).
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    dzy = z - y
    E1 = dzy * th.t1
    E2 = dzy * th.t2
    F1 = y * th.T1
    F2 = y * th.T2
    if not cls:
        zero = np.zeros(np.broadcast(y, z).shape)
        return zero, zero
    expos = []
    for (al, be, m, n, p, r) in cls:
        expos.append(al * E1 + be * E2 + m * F1 + n * F2)
    shift = expos[0]
    for e in expos[1:]:
        shift = np.maximum(shift, e)
    total = np.zeros(np.broadcast(y, z).shape)
    for expo, ((al, be, m, n, p, r), (v, _mag)) in zip(expos, cls.items()):
        mono = v
        if p:
            mono = mono * dzy**p
        if r:
            mono = mono * y**r
        total = total + mono * np.exp(expo - shift)
    return total, shift


# ---------------------------------------------------------------------------
# Scaled-number helpers: a scaled value is a pair (mantissa, shift).
# ---------------------------------------------------------------------------


def sc_mul(a, b):
    return a[0] * b[0], a[1] + b[1]


def sc_div(a, b):
    return a[0] / b[0], a[1] - b[1]


def sc_neg(a):
    return -a[0], a[1]


def sc_add(a, b):
    s = np.maximum(a[1], b[1])
    return a[0] * np.exp(a[1] - s) + b[0] * np.exp(b[1] - s), s


def sc_sub(a, b):
    return sc_add(a, sc_neg(b))


def sc_float(a):
    """Collapse a scaled value to a float; overflow raises, underflow -> 0."""
    m = np.asarray(a[0], dtype=float)
    s = np.asarray(a[1], dtype=float)
    out = np.where(m == 0.0, 0.0, m * np.exp(np.where(m == 0.0, 0.0, np.minimum(s, EXP_CLAMP + 1))))
    if np.any(np.isfinite(m) & (np.abs(out) == np.inf)):
        raise OverflowGuard("scaled value exceeds double-precision range")
    if np.any((s > EXP_CLAMP) & (m != 0.0) & np.isfinite(m)):
        # exp alone would have overflowed; re-check the true magnitude
        with np.errstate(over="ignore"):
            logmag = np.where(m == 0.0, -np.inf, np.log(np.abs(np.where(m == 0.0, 1.0, m))) + s)
        if np.any(logmag > EXP_CLAMP):
            raise OverflowGuard("scaled value exceeds double-precision range")
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Builders for the appendix functions, keyed by (c, params).
# Key order: (alpha, beta, m, n, p, r) multiplying (E1, E2, F1, F2) and the
# monomials (z-y)^p, y^r.
# ---------------------------------------------------------------------------


@lru_cache(maxsize=512)
def _cls_d(c: float, p: ModelParams) -> dict:
    th = theta_set(c, p)
    t1, t2, T1, T2 = th.t1, th.t2, th.T1, th.T2
    cls: dict = {}
    _add(cls, (1, 0, 0, 1, 0, 0), t2)
    _add(cls, (1, 0, 1, 0, 0, 0), -t2)
    _add(cls, (0, 1, 0, 1, 0, 0), T2)
    _add(cls, (1, 0, 0, 1, 0, 0), -T2)
    _add(cls, (0, 1, 0, 1, 0, 0), -t1)
    _add(cls, (0, 1, 1, 0, 0, 0), t1)
    _add(cls, (0, 1, 1, 0, 0, 0), -T1)
    _add(cls, (1, 0, 1, 0, 0, 0), T1)
    return _flush(cls)


@lru_cache(maxsize=512)
def _cls_b00(c: float, p: ModelParams) -> dict:
    th = theta_set(c, p)
    a = p.a
    t1, t2, T1, T2 = th.t1, th.t2, th.T1, th.T2
    t1p, t2p, T2p = th.t1p, th.t2p, th.T2p
    D = t1 - t2
    cls: dict = {}
    _add(cls, (0, 1, 0, 1, 0, 0), -a * D * T2)
    _add(cls, (1, 0, 0, 0, 0, 0), -D * t2)
    _add(cls, (1, 0, 0, 0, 0, 0), a * D * t2)
    _add(cls, (1, 0, 0, 1, 0, 0), -a * D * t2)
    _add(cls, (1, 0, 0, 1, 0, 0), a * D * T2)
    _add(cls, (0, 1, 0, 0, 0, 0), D * t1)
    _add(cls, (0, 1, 0, 0, 0, 0), -a * D * t1)
    _add(cls, (0, 1, 0, 1, 0, 0), a * D * t1)
    _add(cls, (0, 0, 0, 0, 0, 0), -D * D)
    _add(cls, (1, 0, 0, 0, 0, 0), -c * (1 - a) * D * t2p)
    _add(cls, (1, 0, 0, 1, 0, 0), -a * c * D * t2p)
    _add(cls, (0, 1, 0, 1, 1, 0), -a * c * D * T2 * t2p)
    _add(cls, (0, 1, 0, 0, 1, 0), c * (1 - a) * D * t1 * t2p)
    _add(cls, (0, 1, 0, 1, 1, 0), a * c * D * t1 * t2p)
    _add(cls, (0, 1, 0, 1, 0, 0), -a * a * c * D * T2p)
    _add(cls, (0, 1, 0, 1, 0, 1), -a * a * c * D * T2 * T2p)
    _add(cls, (1, 0, 0, 1, 0, 0), a * a * c * D * T2p)
    _add(cls, (1, 0, 0, 1, 0, 1), -a * a * c * D * t2 * T2p)
    _add(cls, (1, 0, 0, 1, 0, 1), a * a * c * D * T2 * T2p)
    _add(cls, (0, 1, 0, 1, 0, 1), a * a * c * D * t1 * T2p)
    _add(cls, (0, 1, 0, 0, 0, 0), c * (1 - a) * D * t1p)
    _add(cls, (0, 1, 0, 1, 0, 0), a * c * D * t1p)
    _add(cls, (1, 0, 0, 0, 1, 0), -c * (1 - a) * D * t2 * t1p)
    _add(cls, (1, 0, 0, 1, 1, 0), -a * c * D * (t2 - T2) * t1p)
    _add(cls, (1, 0, 0, 0, 0, 0), c * (1 - a) * t2 * (t1p - t2p))
    _add(cls, (1, 0, 0, 1, 0, 0), a * c * (t2 - T2) * (t1p - t2p))
    _add(cls, (0, 1, 0, 1, 0, 0), a * c * T2 * (t1p - t2p))
    _add(cls, (0, 1, 0, 0, 0, 0), -c * (1 - a) * t1 * (t1p - t2p))
    _add(cls, (0, 1, 0, 1, 0, 0), -a * c * t1 * (t1p - t2p))
    return _flush(cls)


@lru_cache(maxsize=512)
def _cls_b01(c: float, p: ModelParams) -> dict:
    th = theta_set(c, p)
    a = p.a
    t1, t2, T2 = th.t1, th.t2, th.T2
    D = t1 - t2
    cls: dict = {}
    _add(cls, (0, 0, 0, 1, 0, 0), c * D * a * T2 * (T2 - t2))
    _add(cls, (0, 0, 0, 0, 0, 0), c * D * (1 - a) * t1 * t2)
    _add(cls, (0, 0, 0, 1, 0, 0), c * D * a * t1 * (t2 - T2))
    return _flush(cls)


@lru_cache(maxsize=512)
def _cls_b10(c: float, p: ModelParams) -> dict:
    th = theta_set(c, p)
    a = p.a
    t1, t2, T1, T2 = th.t1, th.t2, th.T1, th.T2
    t1p, t2p, T1p, T2p = th.t1p, th.t2p, th.T1p, th.T2p
    D = t1 - t2
    cls: dict = {}
    _add(cls, (0, 1, 1, 0, 0, 0), -D * t1p)
    _add(cls, (0, 1, 0, 1, 0, 0), D * t1p)
    _add(cls, (1, 0, 1, 0, 1, 0), D * t1p * (t2 - T1))
    _add(cls, (1, 0, 0, 1, 1, 0), D * t1p * (T2 - t2))
    _add(cls, (1, 0, 1, 0, 0, 0), -a * D * T1p)
    _add(cls, (0, 1, 1, 0, 0, 0), a * D * T1p)
    _add(cls, (1, 0, 1, 0, 0, 1), -a * D * T1 * T1p)
    _add(cls, (0, 1, 1, 0, 0, 1), a * D * T1 * T1p)
    _add(cls, (0, 1, 1, 0, 0, 0), (t1 - T1) * (t1p - t2p))
    _add(cls, (0, 1, 0, 1, 0, 0), (T2 - t1) * (t1p - t2p))
    _add(cls, (1, 0, 1, 0, 0, 0), (T1 - t2) * (t1p - t2p))
    _add(cls, (1, 0, 0, 1, 0, 0), (t2 - T2) * (t1p - t2p))
    _add(cls, (1, 0, 1, 0, 0, 0), D * t2p)
    _add(cls, (1, 0, 0, 1, 0, 0), -D * t2p)
    _add(cls, (0, 1, 1, 0, 1, 0), D * t2p * (T1 - t1))
    _add(cls, (0, 1, 0, 1, 1, 0), D * t2p * (t1 - T2))
    _add(cls, (1, 0, 0, 1, 0, 0), a * D * T2p)
    _add(cls, (0, 1, 0, 1, 0, 0), -a * D * T2p)
    _add(cls, (1, 0, 0, 1, 0, 1), a * D * T2 * T2p)
    _add(cls, (0, 1, 0, 1, 0, 1), -a * D * T2 * T2p)
    _add(cls, (0, 1, 1, 0, 0, 1), -a * D * t1 * T1p)
    _add(cls, (0, 1, 0, 1, 0, 1), a * D * t1 * T2p)
    _add(cls, (1, 0, 1, 0, 0, 1), a * D * t2 * T1p)
    _add(cls, (1, 0, 0, 1, 0, 1), -a * D * t2 * T2p)
    return _flush(cls)


@lru_cache(maxsize=512)
def _cls_b11(c: float, p: ModelParams) -> dict:
    th = theta_set(c, p)
    t1, t2, T1, T2 = th.t1, th.t2, th.T1, th.T2
    D = t1 - t2
    cls: dict = {}
    _add(cls, (0, 0, 1, 0, 0, 0), -D * (T1 - t1) * (T1 - t2))
    _add(cls, (0, 0, 0, 1, 0, 0), -D * (t2 - T2) * (T2 - t1))
    return _flush(cls)


# Difference of the two homogeneous solutions, (e^{E1} - e^{E2}).
_P_CLS = {(1, 0, 0, 0, 0, 0): (1.0, 1.0), (0, 1, 0, 0, 0, 0): (-1.0, 1.0)}


@lru_cache(maxsize=512)
def _cls_c0_numerator(c: float, p: ModelParams) -> dict:
    """Numerator of C0 over d^2, in class space."""
    th = theta_set(c, p)
    d = _cls_d(c, p)
    b00 = _cls_b00(c, p)
    b10 = _cls_b10(c, p)
    b01 = _cls_b01(c, p)
    b11 = _cls_b11(c, p)
    part00 = cls_add(cls_mul(cls_dz(b00, th), d), cls_scale(cls_mul(b00, cls_dz(d, th)), -1.0))
    part10 = cls_add(cls_mul(cls_dz(b10, th), d), cls_scale(cls_mul(b10, cls_dz(d, th)), -1.0))
    return cls_add(cls_mul(b11, part00), cls_scale(cls_mul(b01, part10), -1.0))


@lru_cache(maxsize=512)
def _cls_c10_numerator(c: float, p: ModelParams) -> dict:
    th = theta_set(c, p)
    d = _cls_d(c, p)
    b00 = _cls_b00(c, p)
    b10 = _cls_b10(c, p)
    b01 = _cls_b01(c, p)
    b11 = _cls_b11(c, p)
    part10 = cls_add(cls_mul(cls_dy(b10, th), d), cls_scale(cls_mul(b10, cls_dy(d, th)), -1.0))
    part00 = cls_add(cls_mul(cls_dy(b00, th), d), cls_scale(cls_mul(b00, cls_dy(d, th)), -1.0))
    return cls_add(cls_mul(b01, part10), cls_scale(cls_mul(b11, part00), -1.0))


@lru_cache(maxsize=512)
def _cls_c11_numerator(c: float, p: ModelParams) -> dict:
    th = theta_set(c, p)
    d = _cls_d(c, p)
    b01 = _cls_b01(c, p)
    b11 = _cls_b11(c, p)
    u1 = cls_mul(_P_CLS, b01)
    u2 = cls_mul(_P_CLS, b11)
    part1 = cls_add(cls_mul(cls_dy(u1, th), d), cls_scale(cls_mul(u1, cls_dy(d, th)), -1.0))
    part2 = cls_add(cls_mul(cls_dy(u2, th), d), cls_scale(cls_mul(u2, cls_dy(d, th)), -1.0))
    return cls_add(cls_mul(b11, part1), cls_scale(cls_mul(b01, part2), -1.0))


@lru_cache(maxsize=512)
def _cls_c21_c22_numerators(c: float, p: ModelParams) -> tuple[dict, dict]:
    """Numerators of dC0/dy and dC0/dz over d^3, in class space.

    With C0 = N/d^2: dC0/dv = (dN/dv * d - 2 N * dd/dv) / d^3.
    """
    th = theta_set(c, p)
    d = _cls_d(c, p)
    N = _cls_c0_numerator(c, p)
    n21 = cls_add(cls_mul(cls_dy(N, th), d), cls_scale(cls_mul(N, cls_dy(d, th)), -2.0))
    n22 = cls_add(cls_mul(cls_dz(N, th), d), cls_scale(cls_mul(N, cls_dz(d, th)), -2.0))
    return n21, n22


# ---------------------------------------------------------------------------
# Public evaluators.
# ---------------------------------------------------------------------------


def aux_d_scaled(y, z, c: float, p: ModelParams):
    return cls_eval(_cls_d(c, p), y, z, theta_set(c, p))


def aux_d(y: float, z: float, c: float, p: ModelParams) -> float:
    """The shared positive denominator of the auxiliary pair."""
    return sc_float(aux_d_scaled(y, z, c, p))


def aux_b(y: float, z: float, w: float, c: float, p: ModelParams) -> tuple[float, float]:
    """Auxiliary pair (b0, b1); affine in the lower-curve slope ``w``."""
    th = theta_set(c, p)
    d = cls_eval(_cls_d(c, p), y, z, th)
    pw = cls_eval(_P_CLS, y, z, th)
    b00 = cls_eval(_cls_b00(c, p), y, z, th)
    b01 = cls_eval(_cls_b01(c, p), y, z, th)
    b10 = cls_eval(_cls_b10(c, p), y, z, th)
    b11 = cls_eval(_cls_b11(c, p), y, z, th)
    D = th.t1 - th.t2
    num0 = sc_add(b00, sc_mul(sc_mul(pw, b01), (np.asarray(w, dtype=float), 0.0)))
    num1 = sc_add(b10, sc_mul(sc_mul(pw, b11), (np.asarray(w, dtype=float), 0.0)))
    b0 = sc_float(sc_div(num0, d)) / (p.q * D)
    b1 = sc_float(sc_div(num1, d)) / D
    return b0, b1


def c0_scaled(y, z, c: float, p: ModelParams):
    """C0 as a scaled (mantissa, shift) pair; broadcasts over arrays in z."""
    th = theta_set(c, p)
    num = cls_eval(_cls_c0_numerator(c, p), y, z, th)
    den = cls_eval(_cls_d(c, p), y, z, th)
    return sc_div(num, sc_mul(den, den))


def _spec_fd_step(arg: float) -> float:
    return max(1e-5, 1e-7 * abs(arg))


def _fd_scaled(f, x0: float, h: float, label: str):
    """4th-order central difference with one Richardson refinement on a
    scaled-valued function; raises StepCollapse on refinement disagreement."""

    def stencil(hh):
        vals = [f(x0 - 2 * hh), f(x0 - hh), f(x0 + hh), f(x0 + 2 * hh)]
        s = max(v[1] for v in vals)
        num = (
            vals[0][0] * math.exp(vals[0][1] - s)
            - 8 * vals[1][0] * math.exp(vals[1][1] - s)
            + 8 * vals[2][0] * math.exp(vals[2][1] - s)
            - vals[3][0] * math.exp(vals[3][1] - s)
        )
        return num / (12 * hh), s

    d1 = stencil(h)
    d2 = stencil(h / 2)
    s = max(d1[1], d2[1])
    m1 = d1[0] * math.exp(d1[1] - s)
    m2 = d2[0] * math.exp(d2[1] - s)
    m = (16 * m2 - m1) / 15
    scale = max(abs(m), abs(m1), abs(m2))
    if scale > 0 and abs(m2 - m1) > 1e-6 * scale:
        raise StepCollapse(
            f"finite-difference refinement for {label} disagrees by "
            f"{abs(m2 - m1) / scale:.3e} relative (step {h:.3e})"
        )
    return m, s


@lru_cache(maxsize=512)
def _cls_c22_reduced_numerator(c: float, p: ModelParams) -> dict:
    """dC0/dz numerator built from the dominant-family C0 numerator.

    The top exponential family of the C0 numerator is removed (its surviving
    coefficients are analytic-cancellation residue, see the boundary solver)
    and the remainder reindexed down by one e^{(z-y)theta1(c)} factor, which
    rescales C0/C22 jointly without changing Newton steps or residual ratios
    but keeps every evaluation inside double-precision range when the
    exponent spread is large.
    """
    th = theta_set(c, p)
    reduced = {
        (al - 1, be, m, n, pw, r): v
        for (al, be, m, n, pw, r), v in _cls_c0_numerator(c, p).items()
        if al <= 1
    }
    d = _cls_d(c, p)
    return cls_add(
        cls_mul(cls_dz(reduced, th), d),
        cls_scale(cls_mul(reduced, cls_dz(d, th)), -2.0),
    )


@lru_cache(maxsize=512)
def _cls_c0_numerator_dc(c: float, p: ModelParams) -> dict:
    return cls_dc(_cls_c0_numerator, c, p)


@lru_cache(maxsize=512)
def _cls_d_dc(c: float, p: ModelParams) -> dict:
    return cls_dc(_cls_d, c, p)


def c20_by_fd(y: float, z: float, c: float, p: ModelParams):
    """C20 = -dC0/dc by 4th-order central difference with Richardson check.

    Cross-check route for the class-space derivative used in production;
    accurate while the exponent spread of the numerator families is moderate,
    raises StepCollapse once evaluation noise dominates the stencil.
    """
    return sc_neg(
        _fd_scaled(lambda cc: c0_scaled(y, z, cc, p), c, _spec_fd_step(c), "dC0/dc")
    )


def variational_C_scaled(y: float, z: float, c: float, p: ModelParams):
    """All six variational coefficients as scaled (mantissa, shift) pairs.

    C20 = -dC0/dc uses the class-space c-derivative of the numerator and the
    denominator: with C0 = N/d^2, dC0/dc = (dN/dc * d - 2 N * dd/dc) / d^3.
    """
    th = theta_set(c, p)
    d = cls_eval(_cls_d(c, p), y, z, th)
    d2 = sc_mul(d, d)
    d3 = sc_mul(d2, d)
    Nv = cls_eval(_cls_c0_numerator(c, p), y, z, th)
    C0 = sc_div(Nv, d2)
    C10 = sc_div(cls_eval(_cls_c10_numerator(c, p), y, z, th), d2)
    C11 = sc_div(cls_eval(_cls_c11_numerator(c, p), y, z, th), d2)
    n21, n22 = _cls_c21_c22_numerators(c, p)
    C21 = sc_div(cls_eval(n21, y, z, th), d3)
    C22 = sc_div(cls_eval(n22, y, z, th), d3)
    dN = cls_eval(_cls_c0_numerator_dc(c, p), y, z, th)
    dd = cls_eval(_cls_d_dc(c, p), y, z, th)
    n20 = sc_sub(sc_mul(dN, d), sc_mul(sc_mul((2.0, 0.0), Nv), dd))
    C20 = sc_neg(sc_div(n20, d3))
    return C0, C10, C11, C20, C21, C22


def variational_C(y: float, z: float, c: float, p: ModelParams):
    """Float versions of the six variational coefficients (underflow -> 0)."""
    return tuple(sc_float(v) for v in variational_C_scaled(y, z, c, p))


# ---------------------------------------------------------------------------
# Basis functions of the no-change region and their analytic partials.
# ---------------------------------------------------------------------------


def _exp(arg):
    arg = np.asarray(arg, dtype=float)
    if np.any(arg > EXP_CLAMP):
        raise OverflowGuard(f"exponential argument exceeds clamp {EXP_CLAMP}")
    return np.exp(arg)


def basis_f(y, x, c: float, p: ModelParams):
    """Basis values (f10, f11, f20, f21) of the piecewise closed form."""
    th = theta_set(c, p)
    a = p.a
    t1, t2, T1, T2 = th.t1, th.t2, th.T1, th.T2
    f10 = c * a / p.q * (1.0 - _exp(T2 * x))
    f11 = _exp(T1 * x) - _exp(T2 * x)
    e1 = _exp(t1 * (x - y))
    e2 = _exp(t2 * (x - y))
    eF2 = _exp(T2 * y)
    f20 = c / (p.q * (t2 - t1)) * (
        t2
        + (a - 1) * e1 * t2
        + a * eF2 * (-e2 * T2 + e1 * (T2 - t2))
        + t1 * (-1.0 + e2 * (1.0 + a * (eF2 - 1.0)))
    )
    f21 = sc_float(aux_d_scaled(y, x, c, p)) / (t1 - t2)
    return f10, f11, f20, f21


def basis_f_partials(y, x, c: float, p: ModelParams) -> dict:
    """Analytic x- and c-partials of the basis functions.

    Keys: f10_x, f10_xx, f11_x, f11_xx, f20_x, f20_xx, f21_x, f21_xx,
    f10_c, f11_c.  The c-partials treat y as independent (the curve motion
    is accounted for by the caller).
    """
    th = theta_set(c, p)
    a = p.a
    t1, t2, T1, T2 = th.t1, th.t2, th.T1, th.T2
    T1p, T2p = th.T1p, th.T2p
    eT1x = _exp(T1 * x)
    eT2x = _exp(T2 * x)
    out = {
        "f10_x": -c * a / p.q * T2 * eT2x,
        "f10_xx": -c * a / p.q * T2 * T2 * eT2x,
        "f11_x": T1 * eT1x - T2 * eT2x,
        "f11_xx": T1 * T1 * eT1x - T2 * T2 * eT2x,
        "f10_c": a / p.q * (1.0 - eT2x) - c * a / p.q * x * a * T2p * eT2x,
        "f11_c": x * (a * T1p * eT1x - a * T2p * eT2x),
    }
    e1 = _exp(t1 * (x - y))
    e2 = _exp(t2 * (x - y))
    eF2 = _exp(T2 * y)
    pref = c / (p.q * (t2 - t1))
    out["f20_x"] = pref * (
        (a - 1) * t1 * e1 * t2
        + a * eF2 * (-t2 * e2 * T2 + t1 * e1 * (T2 - t2))
        + t1 * t2 * e2 * (1.0 + a * (eF2 - 1.0))
    )
    out["f20_xx"] = pref * (
        (a - 1) * t1 * t1 * e1 * t2
        + a * eF2 * (-t2 * t2 * e2 * T2 + t1 * t1 * e1 * (T2 - t2))
        + t1 * t2 * t2 * e2 * (1.0 + a * (eF2 - 1.0))
    )
    D = t1 - t2
    th_cls = _cls_d(c, p)
    d1 = cls_dz(th_cls, th)
    d2 = cls_dz(d1, th)
    out["f21_x"] = sc_float(cls_eval(d1, y, x, th)) / D
    out["f21_xx"] = sc_float(cls_eval(d2, y, x, th)) / D
    return out


@lru_cache(maxsize=512)
def _cls_f20(c: float, p: ModelParams) -> dict:
    """Class form of the mid-region inhomogeneous basis function f20."""
    th = theta_set(c, p)
    a = p.a
    t1, t2, T2 = th.t1, th.t2, th.T2
    pref = c / (p.q * (t2 - t1))
    cls: dict = {}
    _add(cls, (0, 0, 0, 0, 0, 0), pref * (t2 - t1))
    _add(cls, (1, 0, 0, 0, 0, 0), pref * (a - 1.0) * t2)
    _add(cls, (0, 1, 0, 0, 0, 0), pref * (1.0 - a) * t1)
    _add(cls, (1, 0, 0, 1, 0, 0), pref * a * (T2 - t2))
    _add(cls, (0, 1, 0, 1, 0, 0), pref * a * (t1 - T2))
    return _flush(cls)


@lru_cache(maxsize=512)
def _cls_f21(c: float, p: ModelParams) -> dict:
    """Class form of the mid-region homogeneous basis function f21 = d/(t1-t2)."""
    th = theta_set(c, p)
    return cls_scale(_cls_d(c, p), 1.0 / (th.t1 - th.t2))


@lru_cache(maxsize=512)
def _cls_f20_dc(c: float, p: ModelParams) -> dict:
    return cls_dc(_cls_f20, c, p)


@lru_cache(maxsize=512)
def _cls_f21_dc(c: float, p: ModelParams) -> dict:
    return cls_dc(_cls_f21, c, p)


def basis_shift_partials(y, x, c: float, p: ModelParams) -> dict:
    """Partials of the mid-region basis in the threshold level y and rate c.

    Keys: f20_y, f21_y, f20_c, f21_c.  The c-partials hold y fixed; curve
    motion enters through the caller's chain rule.
    """
    th = theta_set(c, p)
    return {
        "f20_y": sc_float(cls_eval(cls_dy(_cls_f20(c, p), th), y, x, th)),
        "f21_y": sc_float(cls_eval(cls_dy(_cls_f21(c, p), th), y, x, th)),
        "f20_c": sc_float(cls_eval(_cls_f20_dc(c, p), y, x, th)),
        "f21_c": sc_float(cls_eval(_cls_f21_dc(c, p), y, x, th)),
    }
