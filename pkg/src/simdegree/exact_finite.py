"""Exact expected pair counts at finite n, evaluated in log space.

For an ensemble ``ModelParams(n, d, k, q, t)`` and similarity number ``S``:

    |A_S|      = d^n * C(n, S) * (d-1)^(n-S)
    P_S        = [ (D-q) (D-q-1 + q [S]_k/[n]_k) / (D (D-1)) ]^t,   D = d^k
    E_S        = |A_S| * P_S

where ``[x]_k`` is the falling factorial. The sum of ``E_S`` over S is the
second moment E(N^2) of the solution count.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, ParameterError, UndefinedAverageError
from .model_gb import ModelParams

# Largest log magnitude whose exponential is still a finite double.
_LOG_FLOAT_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True, order=False)
class LogValue:
    """Natural log of a nonnegative number; exact zero is a separate state."""

    log: float
    is_zero: bool = False

    @classmethod
    def zero(cls) -> "LogValue":
        return cls(-math.inf, True)

    @classmethod
    def of(cls, x: float) -> "LogValue":
        if x < 0:
            raise ValueError(f"LogValue needs a nonnegative number, got {x}")
        return cls.zero() if x == 0 else cls(math.log(x))

    def exp(self) -> float:
        """Linear value; ``inf`` when it overflows a double."""
        if self.is_zero:
            return 0.0
        if self.log > _LOG_FLOAT_MAX:
            return math.inf
        return math.exp(self.log)

    def __mul__(self, other: "LogValue") -> "LogValue":
        if self.is_zero or other.is_zero:
            return LogValue.zero()
        return LogValue(self.log + other.log)


def log_sum(values: Sequence[LogValue]) -> LogValue:
    logs = [v.log for v in values if not v.is_zero]
    if not logs:
        return LogValue.zero()
    return LogValue(float(logsumexp(logs)))


@dataclass(frozen=True)
class PairCountProfile:
    """log E(|A_S^Sat|) for S = 0..n."""

    params: ModelParams
    log_counts: tuple[LogValue, ...]

    def __post_init__(self):
        if len(self.log_counts) != self.params.n + 1:
            raise ParameterError(
                f"profile length {len(self.log_counts)} != n+1 = {self.params.n + 1}"
            )
        for v in self.log_counts:
            if not v.is_zero and not math.isfinite(v.log):
                raise ParameterError(f"non-finite profile entry {v}")

    @property
    def n(self) -> int:
        return self.params.n

    def linear(self) -> np.ndarray:
        return np.array([v.exp() for v in self.log_counts])

    def _support(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.array([S for S, v in enumerate(self.log_counts) if not v.is_zero], dtype=int)
        logs = np.array([self.log_counts[S].log for S in idx], dtype=float)
        return idx, logs


def _check_S(params: ModelParams, S: int) -> None:
    if not 0 <= S <= params.n:
        raise DomainError(f"S must lie in [0, n={params.n}] (got S={S})")


def falling_factorial(x: int, k: int) -> int:
    """x (x-1) ... (x-k+1); zero whenever 0 <= x < k."""
    out = 1
    for i in range(k):
        out *= x - i
    return out


def log_pair_population(params: ModelParams, S: int) -> LogValue:
    """log |A_S|: ordered assignment pairs agreeing on exactly S variables."""
    _check_S(params, S)
    n, d = params.n, params.d
    log_binom = math.lgamma(n + 1) - math.lgamma(S + 1) - math.lgamma(n - S + 1)
    return LogValue(n * math.log(d) + log_binom + (n - S) * math.log(d - 1))


def log_pair_sat_prob(params: ModelParams, S: int) -> LogValue:
    """log P(a fixed pair with similarity number S satisfies a random instance)."""
    _check_S(params, S)
    if params.t == 0:
        return LogValue(0.0)
    n, k, q = params.n, params.k, params.q
    D = params.tuple_count
    # Exact integer ratio of falling factorials; k is small.
    overlap = falling_factorial(S, k) / falling_factorial(n, k)
    per_constraint = (
        math.log(D - q)
        + math.log(D - q - 1 + q * overlap)
        - math.log(D)
        - math.log(D - 1)
    )
    # per_constraint <= 0 analytically; clamp rounding noise.
    return LogValue(min(params.t * per_constraint, 0.0))


def expected_sat_pairs(params: ModelParams) -> PairCountProfile:
    """The finite-n profile log E(|A_S^Sat|), S = 0..n."""
    entries = tuple(
        log_pair_population(params, S) * log_pair_sat_prob(params, S)
        for S in range(params.n + 1)
    )
    return PairCountProfile(params, entries)


def avg_similarity_finite(profile: PairCountProfile) -> float:
    """Profile-weighted mean of S/n."""
    idx, logs = profile._support()
    if idx.size == 0:
        raise UndefinedAverageError("average similarity undefined: all-zero profile")
    w = np.exp(logs - logs.max())
    return float(np.dot(idx / profile.n, w) / w.sum())


def second_moment_finite(profile: PairCountProfile) -> LogValue:
    """log E(N^2) = log of the profile total."""
    return log_sum(profile.log_counts)


def concentration_window(n: int, center: float, epsilon: float) -> tuple[int, int]:
    """Inclusive S range floor((c-eps) n)+1 .. floor((c+eps) n), clipped to [0, n].

    Returns ``(lo, hi)`` with ``lo > hi`` for an empty window.
    """
    lo = math.floor((center - epsilon) * n) + 1
    hi = math.floor((center + epsilon) * n)
    return max(lo, 0), min(hi, n)


def concentration_mass(profile: PairCountProfile, center: float, epsilon: float) -> float:
    """Share of the profile total carried by the window around ``center``."""
    if not epsilon > 0:
        raise DomainError(f"epsilon must be > 0 (got {epsilon})")
    if not 0 <= center <= 1:
        raise DomainError(f"center must lie in [0, 1] (got {center})")
    lo, hi = concentration_window(profile.n, center, epsilon)
    if lo > hi:
        return 0.0
    total = second_moment_finite(profile)
    if total.is_zero:
        raise UndefinedAverageError("concentration undefined: all-zero profile")
    inside = log_sum(profile.log_counts[lo : hi + 1])
    if inside.is_zero:
        return 0.0
    return min(1.0, math.exp(inside.log - total.log))


def fmt(x: float) -> str:
    """Floats are written with 12 significant digits everywhere."""
    return f"{x:.12g}"


def profile_to_csv(profile: PairCountProfile) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["S", "s", "log_E", "E"])
    for S, v in enumerate(profile.log_counts):
        lin = v.exp()
        w.writerow([
            S,
            fmt(S / profile.n),
            "" if v.is_zero else fmt(v.log),
            "" if math.isinf(lin) else fmt(lin),
        ])
    return buf.getvalue()


def read_profile_csv(text: str) -> list[dict]:
    """Parse the data rows of a profile CSV; footer lines are skipped."""
    rows = []
    # Footer lines are ``name=value``; some names contain commas.
    lines = [ln for ln in text.splitlines() if "," in ln and "=" not in ln]
    for row in csv.DictReader(lines):
        rows.append({
            "S": int(row["S"]),
            "s": float(row["s"]),
            "log_E": float(row["log_E"]) if row["log_E"] else None,
            "E": float(row["E"]) if row["E"] else None,
        })
    return rows
