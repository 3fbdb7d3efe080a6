"""The n -> infinity analysis of the expected pair-count profile.

For large n, E(|A_s^Sat|) ~ phi(s) exp(n f(s)) with exponent

    f(s) = h(s) - r g(s)
    h(s) = ln d - s ln s - (1-s) ln(1-s) + (1-s) ln(d-1)
    g(s) = ln D + ln(D-1) - ln(D-q) - ln(B + q s^k),     D = d^k, B = D-q-1

The critical points of f solve r = r(s) = h'(s)/g'(s) on [1/d, 1). When
r'(s) has two roots s01 < s03 (around the inflection point s02), the curve
r(s) splits into three monotone branches s1, s2, s3. The dominant maximum
of f jumps from s1(r) to s3(r) at the unique root r_cr of

    F(r) = f(s1(r)) - f(s3(r)).

All root finding is bracketed bisection on intervals where the sign
structure is known in advance.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import bisect
from scipy.special import logsumexp, xlogy

from .errors import (
    AtThresholdError,
    CurvatureError,
    DomainError,
    NumericalRegimeError,
    ParameterError,
    RegimeError,
)
from .exact_finite import LogValue, log_sum

# Working cap for the open endpoint s -> 1, where r and r' diverge.
S_CAP = 1.0 - 1e-9
# Bisection tolerances: absolute in s, relative in r.
S_XTOL = 1e-15
R_RTOL = 1e-12
# Relative half-width of the r = r_cr window.
THRESHOLD_RTOL = 1e-10


class Branch(enum.IntEnum):
    ONE = 1
    TWO = 2
    THREE = 3
    THRESHOLD = 0

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value) -> "Branch":
        if isinstance(value, Branch):
            return value
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(int(value))


class Regime(enum.Enum):
    TWO_ROOTS = "two_roots"
    NO_TRANSITION = "no_transition"


@dataclass(frozen=True)
class AnalyticContext:
    """Real-parameter triple (k, q, d) and its derived constants."""

    k: int
    q: int
    d: int

    def __post_init__(self):
        if self.k < 2 or self.d < 2 or self.q < 1:
            raise ParameterError(f"need k >= 2, d >= 2, q >= 1 (got k={self.k}, q={self.q}, d={self.d})")
        if self.q >= self.d ** (self.k - 1):
            raise ParameterError(f"q must be < d^(k-1) = {self.d ** (self.k - 1)} (got q={self.q})")
        if (self.k - 1) * self.B - self.q <= 0:
            raise ParameterError("(k-1)(d^k-q-1) - q must be positive")

    @functools.cached_property
    def D(self) -> int:
        return self.d**self.k

    @functools.cached_property
    def B(self) -> int:
        return self.D - self.q - 1

    @functools.cached_property
    def log_d(self) -> float:
        return math.log(self.d)

    @functools.cached_property
    def log_dm1(self) -> float:
        return math.log(self.d - 1)

    @functools.cached_property
    def g_const(self) -> float:
        """ln D + ln(D-1) - ln(D-q)."""
        return self.k * self.log_d + math.log(self.D - 1) - math.log(self.D - self.q)

    @functools.cached_property
    def a(self) -> float:
        return (self.D - 1) / ((self.k - 1) * self.B - self.q)

    @property
    def s_min(self) -> float:
        return 1.0 / self.d


# ---------------------------------------------------------------------------
# Exponent functions

def _check_unit(s, *, open_left=False, open_right=False):
    s_arr = np.asarray(s, dtype=float)
    lo_bad = s_arr <= 0 if open_left else s_arr < 0
    hi_bad = s_arr >= 1 if open_right else s_arr > 1
    if np.any(lo_bad | hi_bad | np.isnan(s_arr)):
        raise DomainError(f"s outside the unit interval: {s}")
    return s_arr


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def h(ctx: AnalyticContext, s):
    """Growth rate of the pair population |A_s|; continuous on [0, 1]."""
    s = _check_unit(s)
    return _out(ctx.log_d - xlogy(s, s) - xlogy(1 - s, 1 - s) + (1 - s) * ctx.log_dm1)


def g(ctx: AnalyticContext, s):
    """Decay rate per unit r of the pair satisfaction probability."""
    s = _check_unit(s)
    return _out(ctx.g_const - np.log(ctx.B + ctx.q * s**ctx.k))


def f(ctx: AnalyticContext, s, r):
    return _out(np.asarray(h(ctx, s)) - r * np.asarray(g(ctx, s)))


def h_prime(ctx: AnalyticContext, s):
    s = _check_unit(s, open_left=True, open_right=True)
    return _out(-np.log(s) + np.log1p(-s) - ctx.log_dm1)


def g_prime(ctx: AnalyticContext, s):
    s = _check_unit(s)
    k, q = ctx.k, ctx.q
    return _out(-k * q * s ** (k - 1) / (ctx.B + q * s**k))


def f_prime(ctx: AnalyticContext, s, r):
    return _out(np.asarray(h_prime(ctx, s)) - r * np.asarray(g_prime(ctx, s)))


def h_double_prime(ctx: AnalyticContext, s):
    s = _check_unit(s, open_left=True, open_right=True)
    return _out(-1.0 / s - 1.0 / (1.0 - s))


def g_double_prime(ctx: AnalyticContext, s):
    """k q s^(k-2) (q s^k - (k-1) B) / (B + q s^k)^2."""
    s = _check_unit(s)
    k, q, B = ctx.k, ctx.q, ctx.B
    return _out(k * q * s ** (k - 2) * (q * s**k - (k - 1) * B) / (B + q * s**k) ** 2)


def f_double_prime(ctx: AnalyticContext, s, r):
    """Curvature of the exponent, differentiated by hand:

        f''(s) = h''(s) - r g''(s)
        h''(s) = -1/s - 1/(1-s)
        g''(s) = k q s^(k-2) (q s^k - (k-1) B) / (B + q s^k)^2

    g'' follows from g'(s) = -k q s^(k-1) / (B + q s^k) by the quotient rule.
    """
    return _out(np.asarray(h_double_prime(ctx, s)) - r * np.asarray(g_double_prime(ctx, s)))


def rho(ctx: AnalyticContext, s):
    s = _check_unit(s)
    k, q = ctx.k, ctx.q
    return _out(q * k * (k - 1) * (s**k - s ** (k - 1)) / (2 * (ctx.B + q * s**k)))


def log_phi(ctx: AnalyticContext, s, r, n: int):
    """log of the sub-exponential prefactor phi(s) = exp(r rho(s)) / sqrt(2 pi n s (1-s)).

    Equal to 0 (phi = 1) at the exact endpoints s = 0 and s = 1.
    """
    s = _check_unit(s)
    interior = (s > 0) & (s < 1)
    si = np.where(interior, s, 0.5)
    val = r * np.asarray(rho(ctx, si)) - 0.5 * np.log(2 * math.pi * n * si * (1 - si))
    return _out(np.where(interior, val, 0.0))


def phi(ctx: AnalyticContext, s, r, n: int):
    return _out(np.exp(np.asarray(log_phi(ctx, s, r, n))))


# ---------------------------------------------------------------------------
# The critical-point curve r(s) = h'(s) / g'(s)

def _check_branch_domain(ctx: AnalyticContext, s):
    s_arr = np.asarray(s, dtype=float)
    if np.any((s_arr < ctx.s_min) | (s_arr >= 1) | np.isnan(s_arr)):
        raise DomainError(f"s must lie in [1/d, 1) = [{ctx.s_min}, 1): got {s}")
    return s_arr


def _log_odds(ctx, s):
    # ln s - ln(1-s) + ln(d-1); zero at s = 1/d.
    return np.log(s) - np.log1p(-s) + ctx.log_dm1


def r_of_s(ctx: AnalyticContext, s):
    """Constraint density at which s is a critical point of f."""
    s = _check_branch_domain(ctx, s)
    k, q, B = ctx.k, ctx.q, ctx.B
    return _out(np.maximum((B / (q * s ** (k - 1)) + s) * _log_odds(ctx, s) / k, 0.0))


def r_prime(ctx: AnalyticContext, s):
    s = _check_branch_domain(ctx, s)
    k, q, B = ctx.k, ctx.q, ctx.B
    L = _log_odds(ctx, s)
    return _out(
        (1 - B * (k - 1) / (q * s**k)) * L / k
        + (B / (q * s ** (k - 1)) + s) * (1 / s + 1 / (1 - s)) / k
    )


def r_double_prime(ctx: AnalyticContext, s):
    s = _check_branch_domain(ctx, s)
    k, q, B = ctx.k, ctx.q, ctx.B
    L = _log_odds(ctx, s)
    qs = q * s ** (k + 1)
    return _out(
        (
            B * k * (k - 1) / qs * L
            + 2 * (q * s**k - B * (k - 1)) / qs / (1 - s)
            + (B + q * s**k) * (2 * s - 1) / (qs * (1 - s) ** 2)
        )
        / k
    )


def _bisect(fn, lo, hi, **kw):
    flo, fhi = fn(lo), fn(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise NumericalRegimeError(f"no sign change on [{lo}, {hi}]: {flo}, {fhi}")
    return bisect(fn, lo, hi, maxiter=400, **kw)


def find_s02(ctx: AnalyticContext) -> float:
    """Unique root of r'' on [1/d, 1), the minimum point of r'."""
    lo, hi = ctx.s_min, S_CAP
    if not r_double_prime(ctx, lo) < 0 or not r_double_prime(ctx, hi) > 0:
        raise NumericalRegimeError(
            f"r'' lacks the sign pattern (-, +) on [{lo}, {hi}] for {ctx}"
        )
    return _bisect(lambda s: r_double_prime(ctx, s), lo, hi, xtol=S_XTOL)


def regime_check(ctx: AnalyticContext) -> Regime:
    """``TWO_ROOTS`` iff min r' = r'(s02) is negative."""
    return Regime.TWO_ROOTS if r_prime(ctx, find_s02(ctx)) < 0 else Regime.NO_TRANSITION


def _require_two_roots(ctx: AnalyticContext, s02: float) -> None:
    rp = r_prime(ctx, s02)
    if not rp < 0:
        raise RegimeError(
            f"no transition for k={ctx.k}, q={ctx.q}, d={ctx.d}: r'(s02) = {rp:.12g} >= 0",
            r_prime_at_s02=rp,
        )


def _s03_bracket(ctx: AnalyticContext, s02: float) -> float:
    hi = 1.0 - (1.0 - s02) / 2
    while r_prime(ctx, hi) <= 0:
        if hi >= S_CAP:
            raise NumericalRegimeError("r' stays non-positive up to the working cap")
        hi = min(1.0 - (1.0 - hi) / 10, S_CAP)
    return hi


def find_s01_s03(ctx: AnalyticContext, s02: float | None = None) -> tuple[float, float]:
    if s02 is None:
        s02 = find_s02(ctx)
    _require_two_roots(ctx, s02)
    rp = functools.partial(r_prime, ctx)
    s01 = _bisect(rp, ctx.s_min, s02, xtol=S_XTOL)
    s03 = _bisect(rp, s02, _s03_bracket(ctx, s02), xtol=S_XTOL)
    return s01, s03


# ---------------------------------------------------------------------------
# Branches and the threshold

@dataclass(frozen=True)
class PhasePortrait:
    context: AnalyticContext
    s01: float
    s02: float
    s03: float
    r_at_s01: float
    r_at_s03: float
    r_cr: float

    @property
    def r_cap(self) -> float:
        """Largest r served by branch three under the working cap."""
        return r_of_s(self.context, S_CAP)

    def branch_domain(self, branch) -> tuple[float, float]:
        branch = Branch.parse(branch)
        if branch is Branch.ONE:
            return 0.0, self.r_at_s01
        if branch is Branch.TWO:
            return self.r_at_s03, self.r_at_s01
        if branch is Branch.THREE:
            return self.r_at_s03, self.r_cap
        raise DomainError(f"no inverse for branch {branch!r}")

    def branch_codomain(self, branch) -> tuple[float, float]:
        branch = Branch.parse(branch)
        return {
            Branch.ONE: (self.context.s_min, self.s01),
            Branch.TWO: (self.s01, self.s03),
            Branch.THREE: (self.s03, S_CAP),
        }[branch]

    def to_dict(self) -> dict:
        c = self.context
        return {
            "k": c.k, "q": c.q, "d": c.d,
            "s01": self.s01, "s02": self.s02, "s03": self.s03,
            "r_at_s01": self.r_at_s01, "r_at_s03": self.r_at_s03,
            "r_cr": self.r_cr,
        }


def branch_inverse(portrait: PhasePortrait, branch, r: float) -> float:
    """s_branch(r): the critical point of f on the given monotone piece of r(s)."""
    branch = Branch.parse(branch)
    ctx = portrait.context
    r_lo, r_hi = portrait.branch_domain(branch)
    if not r_lo <= r <= r_hi:
        raise DomainError(
            f"r={r} outside the domain [{r_lo}, {r_hi}] of branch {branch.label}"
        )
    s_lo, s_hi = portrait.branch_codomain(branch)
    if branch is Branch.TWO:
        # Decreasing piece: r(s01) = r_hi, r(s03) = r_lo.
        if r == r_hi:
            return s_lo
        if r == r_lo:
            return s_hi
    else:
        if r == r_lo:
            return s_lo
        if r == r_hi:
            return s_hi
    return _bisect_to_ulp(lambda s: r_of_s(ctx, s) - r, s_lo, s_hi)


def _bisect_to_ulp(fn, lo, hi):
    """Bisect until ``lo`` and ``hi`` are adjacent doubles; return the one
    with the smaller residual. Near s = 1 the spacing of doubles, not the
    bracket, limits how well r(s) can be matched."""
    flo, fhi = fn(lo), fn(hi)
    if (flo > 0) == (fhi > 0) and flo != 0 and fhi != 0:
        raise NumericalRegimeError(f"no sign change on [{lo}, {hi}]: {flo}, {fhi}")
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fmid = fn(mid)
        if fmid == 0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    return lo if abs(flo) <= abs(fhi) else hi


def cap_f(portrait: PhasePortrait, r: float) -> float:
    """F(r) = f(s1(r)) - f(s3(r)) on the overlap [r(s03), r(s01)]."""
    ctx = portrait.context
    if not portrait.r_at_s03 <= r <= portrait.r_at_s01:
        raise DomainError(
            f"r={r} outside the overlap [{portrait.r_at_s03}, {portrait.r_at_s01}]"
        )
    s1 = branch_inverse(portrait, Branch.ONE, r)
    s3 = branch_inverse(portrait, Branch.THREE, r)
    return f(ctx, s1, r) - f(ctx, s3, r)


def cap_f_prime(portrait: PhasePortrait, r: float) -> float:
    """dF/dr = ln(B + q s1^k) - ln(B + q s3^k); negative on the overlap."""
    ctx = portrait.context
    s1 = branch_inverse(portrait, Branch.ONE, r)
    s3 = branch_inverse(portrait, Branch.THREE, r)
    return math.log(ctx.B + ctx.q * s1**ctx.k) - math.log(ctx.B + ctx.q * s3**ctx.k)


def find_r_cr(ctx: AnalyticContext) -> PhasePortrait:
    """Locate s02, s01, s03 and the threshold r_cr; raises ``RegimeError``
    when the triple has no transition."""
    s02 = find_s02(ctx)
    s01, s03 = find_s01_s03(ctx, s02)
    r01, r03 = r_of_s(ctx, s01), r_of_s(ctx, s03)
    partial = PhasePortrait(ctx, s01, s02, s03, r01, r03, math.nan)
    # For large k, r(s01) lies beyond what branch three reaches below S_CAP;
    # F must already be negative at the reachable end.
    r_hi = min(r01, partial.r_cap)
    r_cr = _bisect(lambda r: cap_f(partial, r), r03, r_hi, xtol=1e-300, rtol=R_RTOL)
    return PhasePortrait(ctx, s01, s02, s03, r01, r03, r_cr)


def phase_portrait(k: int, q: int, d: int) -> PhasePortrait:
    return find_r_cr(AnalyticContext(k=k, q=q, d=d))


def at_threshold(portrait: PhasePortrait, r: float) -> bool:
    return abs(r - portrait.r_cr) <= THRESHOLD_RTOL * portrait.r_cr


class LimitPoint(NamedTuple):
    s: float
    branch: Branch


def s_av_infinity(portrait: PhasePortrait, r: float) -> LimitPoint:
    """Limiting average similarity degree and the branch it lies on."""
    if not r > 0:
        raise DomainError(f"r must be > 0 (got {r})")
    if at_threshold(portrait, r):
        raise AtThresholdError(
            f"r={r} is within {THRESHOLD_RTOL:g} (relative) of r_cr={portrait.r_cr}; "
            "the limit is not single-valued there"
        )
    branch = Branch.ONE if r < portrait.r_cr else Branch.THREE
    return LimitPoint(branch_inverse(portrait, branch, r), branch)


def avg_distance_infinity(portrait: PhasePortrait, r: float) -> float:
    return 1.0 - s_av_infinity(portrait, r).s


# ---------------------------------------------------------------------------
# Laplace summation and the second moment

def laplace_sum_estimate(ctx: AnalyticContext, r: float, n: int, zeta: float) -> LogValue:
    """log of phi(zeta) sqrt(2 n pi / -f''(zeta)) exp(n f(zeta)).

    Estimates sum_i phi(i/n) exp(n f(i/n)) over a window whose unique
    maximum of f is the interior point ``zeta``.
    """
    if not 0 < zeta < 1:
        raise DomainError(f"zeta must be interior to (0, 1) (got {zeta})")
    curvature = f_double_prime(ctx, zeta, r)
    if not curvature < 0:
        raise CurvatureError(f"f''({zeta}) = {curvature} is not negative")
    return LogValue(
        log_phi(ctx, zeta, r, n)
        + 0.5 * math.log(2 * n * math.pi / -curvature)
        + n * f(ctx, zeta, r)
    )


def direct_sum(ctx: AnalyticContext, r: float, n: int, alpha: float, beta: float) -> LogValue:
    """log sum_{i = floor(n alpha)+1}^{floor(n beta)} phi(i/n) exp(n f(i/n))."""
    lo = max(math.floor(n * alpha) + 1, 0)
    hi = min(math.floor(n * beta), n)
    if lo > hi:
        return LogValue.zero()
    s = np.arange(lo, hi + 1) / n
    terms = np.asarray(log_phi(ctx, s, r, n)) + n * np.asarray(f(ctx, s, r))
    return LogValue(float(logsumexp(terms)))


def asymptotic_second_moment(portrait: PhasePortrait, r: float, n: int) -> LogValue:
    """Laplace estimate of log E(N^2).

    Below r_cr the dominant peak is s1(r), above it s3(r). At r_cr (within
    the threshold window) both peaks contribute equally to the rate and the
    estimate is the sum of the two Laplace terms.
    """
    ctx = portrait.context
    if at_threshold(portrait, r):
        r = portrait.r_cr
        return log_sum([
            laplace_sum_estimate(ctx, r, n, branch_inverse(portrait, Branch.ONE, r)),
            laplace_sum_estimate(ctx, r, n, branch_inverse(portrait, Branch.THREE, r)),
        ])
    zeta, _ = s_av_infinity(portrait, r)
    return laplace_sum_estimate(ctx, r, n, zeta)


def s_av_curve(portrait: PhasePortrait, r_values) -> list[dict]:
    """Rows ``r, s_av_inf, branch, d_av_inf``. An r inside the threshold
    window yields two rows labelled ``threshold``, one per branch value."""
    rows = []
    for r in r_values:
        r = float(r)
        if at_threshold(portrait, r):
            for b in (Branch.ONE, Branch.THREE):
                s = branch_inverse(portrait, b, portrait.r_cr)
                rows.append({"r": r, "s_av_inf": s, "branch": "threshold", "d_av_inf": 1.0 - s})
            continue
        s, b = s_av_infinity(portrait, r)
        rows.append({"r": r, "s_av_inf": s, "branch": b.label, "d_av_inf": 1.0 - s})
    return rows
