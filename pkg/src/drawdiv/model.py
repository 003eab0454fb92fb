"""Problem parameters, characteristic roots, constant-rate and refraction values.

The surplus process is a drifted Brownian motion; dividends are paid at a rate
bounded above by ``cbar`` and below by fraction ``a`` of the running maximum
rate.  This module carries the one-dimensional closed forms: the roots of the
characteristic quadratic of the killed generator, the value of a constant-rate
strategy, the value of a refraction (two-rate threshold) strategy and the
optimal refraction threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .errors import (
    BracketError,
    DegenerateDiffusion,
    DomainError,
    OverflowGuard,
)

EXP_CLAMP = 700.0


def guarded_exp(arg: float) -> float:
    """exp with an explicit overflow guard instead of silent infinity."""
    if arg > EXP_CLAMP:
        raise OverflowGuard(f"exponential argument {arg:.6g} exceeds clamp {EXP_CLAMP}")
    return math.exp(arg)


@dataclass(frozen=True)
class ModelParams:
    """Problem instance: drift mu, volatility sigma, discount q, drawdown
    fraction a and maximum dividend rate cbar."""

    mu: float
    sigma: float
    q: float
    a: float
    cbar: float

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"mu must be positive, got {self.mu}")
        if self.sigma < 0:
            raise DomainError(f"sigma must be nonnegative, got {self.sigma}")
        if not self.q > 0:
            raise DomainError(f"q must be positive, got {self.q}")
        if not 0 < self.a < 1:
            raise DomainError(f"a must lie in (0, 1), got {self.a}")
        if not self.cbar > 0:
            raise DomainError(f"cbar must be positive, got {self.cbar}")

    @property
    def interesting_regime(self) -> bool:
        """True when paying at the ceiling is not trivially optimal from 0."""
        return self.cbar > self.q * self.sigma**2 / (2 * self.mu)

    def canonical_text(self) -> str:
        """Canonical key=value representation used by the CLI config loader."""
        lines = [
            f"mu={self.mu!r}",
            f"sigma={self.sigma!r}",
            f"q={self.q!r}",
            f"a={self.a!r}",
            f"cbar={self.cbar!r}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ModelParams":
        fields = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DomainError(f"malformed config line: {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in ("mu", "sigma", "q", "a", "cbar"):
                raise DomainError(f"unknown config key: {key!r}")
            fields[key] = float(value)
        missing = {"mu", "sigma", "q", "a", "cbar"} - set(fields)
        if missing:
            raise DomainError(f"missing config keys: {sorted(missing)}")
        return cls(**fields)


@dataclass(frozen=True)
class RootPair:
    """Roots theta1 > 0 > theta2 of (sigma^2/2) t^2 + (mu - d) t - q = 0."""

    theta1: float
    theta2: float
    d: float


def characteristic_roots(d: float, p: ModelParams) -> RootPair:
    """Characteristic roots for dividend rate ``d``, via the numerically
    stable quadratic: the larger-magnitude root by sign-matched addition,
    the other from the product -2q/sigma^2."""
    if p.sigma == 0:
        raise DegenerateDiffusion("sigma = 0: use the deterministic module")
    s2 = p.sigma**2
    b = d - p.mu
    disc = math.sqrt(b * b + 2 * p.q * s2)
    product = -2 * p.q / s2
    if b >= 0:
        theta1 = (b + disc) / s2
        theta2 = product / theta1
    else:
        theta2 = (b - disc) / s2
        theta1 = product / theta2
    return RootPair(theta1=theta1, theta2=theta2, d=d)


def root_derivatives(d: float, p: ModelParams) -> tuple[float, float]:
    """d/dd of theta1 and theta2, closed form."""
    if p.sigma == 0:
        raise DegenerateDiffusion("sigma = 0: use the deterministic module")
    s2 = p.sigma**2
    b = d - p.mu
    disc = math.sqrt(b * b + 2 * p.q * s2)
    dtheta1 = (1 + b / disc) / s2
    dtheta2 = (1 - b / disc) / s2
    return dtheta1, dtheta2


def constant_rate_value(x: float, d: float, p: ModelParams) -> float:
    """Expected discounted dividends of paying rate ``d`` until ruin."""
    if x < 0:
        raise DomainError(f"surplus must be nonnegative, got {x}")
    if d < 0:
        raise DomainError(f"rate must be nonnegative, got {d}")
    if d == 0:
        return 0.0
    roots = characteristic_roots(d, p)
    return d / p.q * (1.0 - guarded_exp(roots.theta2 * x))


def two_rate_value(x: float, low: float, high: float, b: float, p: ModelParams) -> float:
    """Value of paying rate ``low`` below threshold ``b`` and ``high`` above,
    for any 0 <= low < high.  C^1-matched at the threshold.

    Below b the value solves the low-rate equation with value 0 at ruin; above
    b it approaches high/q.  Written with all exponentials nonpositive so the
    evaluation is stable for large rates and thresholds.
    """
    if x < 0 or b < 0:
        raise DomainError("surplus and threshold must be nonnegative")
    if not 0 <= low < high:
        raise DomainError("need 0 <= low < high")
    rl = characteristic_roots(low, p)
    rh = characteristic_roots(high, p)
    l1, l2 = rl.theta1, rl.theta2
    h2 = rh.theta2
    # Below b: low/q (1 - e^{l2 x}) + k (e^{l1 x} - e^{l2 x})
    # Above b: high/q + D e^{h2 x}
    # Continuity and C^1 matching at b give, with k~ = k e^{l1 b} and
    # D~ = D e^{h2 b}:
    #   g + k~ (1 - E) = r + D~
    #   g' + k~ (l1 - l2 E) = D~ h2
    # where E = e^{(l2-l1) b}, g = low/q (1 - e^{l2 b}), r = high/q.
    E = math.exp((l2 - l1) * b)
    el2b = math.exp(l2 * b)
    g = low / p.q * (1.0 - el2b)
    gp = -low / p.q * l2 * el2b
    r = high / p.q
    denom = h2 * (1.0 - E) - (l1 - l2 * E)
    ktilde = (h2 * (r - g) + gp) / denom
    Dtilde = g + ktilde * (1.0 - E) - r
    if x < b:
        el2x = math.exp(l2 * x)
        return low / p.q * (1.0 - el2x) + ktilde * (
            math.exp(l1 * (x - b)) - math.exp(l2 * x - l1 * b)
        )
    return r + Dtilde * math.exp(h2 * (x - b))


def _refraction_pieces(b: float, p: ModelParams):
    """Shared coefficients of the refraction value at threshold ``b``.

    Returns (T1, T2, t2, num, den) where the below-threshold correction is
    num/q * (e^{T1(x-b)} - e^{T2 x - T1 b}) / den and num, den carry no large
    exponentials.
    """
    low = p.a * p.cbar
    rl = characteristic_roots(low, p)
    rh = characteristic_roots(p.cbar, p)
    T1, T2 = rl.theta1, rl.theta2
    t2 = rh.theta2
    num = low * math.exp(T2 * b) * (T2 - t2) - (1 - p.a) * p.cbar * t2
    den = (T1 - t2) - (T2 - t2) * math.exp((T2 - T1) * b)
    return T1, T2, t2, num, den


def refraction_value(x: float, b: float, p: ModelParams) -> float:
    """Value of the drawdown refraction strategy: pay a*cbar below ``b`` and
    cbar above, starting with the running maximum already at cbar."""
    if x < 0 or b < 0:
        raise DomainError("surplus and threshold must be nonnegative")
    T1, T2, t2, num, den = _refraction_pieces(b, p)
    low = p.a * p.cbar
    if x < b:
        base = low / p.q * (1.0 - math.exp(T2 * x))
        corr = num / p.q * (math.exp(T1 * (x - b)) - math.exp(T2 * x - T1 * b)) / den
        return base + corr
    # Above b: cbar/q + D e^{t2 x}; D~ = D e^{t2 b} from continuity at b.
    base_b = low / p.q * (1.0 - math.exp(T2 * b))
    corr_b = num / p.q * (1.0 - math.exp((T2 - T1) * b)) / den
    Dtilde = base_b + corr_b - p.cbar / p.q
    return p.cbar / p.q + Dtilde * math.exp(t2 * (x - b))


def refraction_slope(x: float, b: float, p: ModelParams) -> float:
    """d/dx of refraction_value (one-sided from below at x = b)."""
    T1, T2, t2, num, den = _refraction_pieces(b, p)
    low = p.a * p.cbar
    if x <= b:
        base = -low / p.q * T2 * math.exp(T2 * x)
        corr = num / p.q * (
            T1 * math.exp(T1 * (x - b)) - T2 * math.exp(T2 * x - T1 * b)
        ) / den
        return base + corr
    base_b = low / p.q * (1.0 - math.exp(T2 * b))
    corr_b = num / p.q * (1.0 - math.exp((T2 - T1) * b)) / den
    Dtilde = base_b + corr_b - p.cbar / p.q
    return Dtilde * t2 * math.exp(t2 * (x - b))


def amplitude_at_ceiling(p: ModelParams, b: float) -> float:
    """Coefficient pairing with the increasing basis solution at c = cbar.

    Equals the refraction coefficient divided by the discriminant of the
    low-rate quadratic, written so large thresholds underflow gracefully
    instead of overflowing.
    """
    T1, _T2, t2, num, den = _refraction_pieces(b, p)
    return num / p.q * math.exp(-T1 * b) / den


def threshold_equation(b: float, p: ModelParams) -> float:
    """Rescaled optimality condition for the refraction threshold.

    The stationarity condition of the refraction coefficient in ``b`` reduces
    to a three-term exponential sum; this returns that sum with the dominant
    exponential factored out, so its sign and roots are preserved.
    """
    low = p.a * p.cbar
    rl = characteristic_roots(low, p)
    rh = characteristic_roots(p.cbar, p)
    T1, T2 = rl.theta1, rl.theta2
    t2 = rh.theta2
    term1 = (p.a - 1) * t2 * (t2 - T1) * T1
    term2 = math.exp((T2 - T1) * b) * (1 - p.a) * t2 * (t2 - T2) * T2
    term3 = math.exp(T2 * b) * p.a * (t2 - T2) * (t2 - T1) * (T2 - T1)
    return term1 + term2 + term3


def optimal_refraction_threshold(p: ModelParams, tol: float = 1e-10) -> float:
    """Optimal refraction threshold b*; 0 outside the interesting regime."""
    if p.sigma == 0:
        raise DegenerateDiffusion("sigma = 0: use the deterministic module")
    if not p.interesting_regime:
        return 0.0
    f = lambda b: threshold_equation(b, p)
    hi = 10 * p.mu / p.q
    f0 = f(0.0)
    for _ in range(5):
        n = 512
        prev_b, prev_v = 0.0, f0
        for i in range(1, n + 1):
            bi = hi * i / n
            vi = f(bi)
            if prev_v == 0.0:
                return prev_b
            if prev_v * vi < 0:
                return brentq(f, prev_b, bi, xtol=tol)
            prev_b, prev_v = bi, vi
        hi *= 2.0
    raise BracketError(
        f"no sign change of the threshold equation in [0, {hi:.6g}] "
        f"after 4 bracket doublings (f(0)={f0:.6g})"
    )
