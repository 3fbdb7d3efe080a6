"""Brute-force ground truth for small ensembles.

Solutions are found by scanning the whole assignment space, similarity
histograms by counting ordered solution pairs, and ensemble means either by
walking every equiprobable instance (``exhaustive_ensemble``) or by Monte
Carlo over seeds ``seed, seed+1, ...`` (``monte_carlo``).
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BudgetError, ParameterError, UndefinedAverageError
from .exact_finite import PairCountProfile, fmt
from .model_gb import Instance, ModelParams, constraint_outcomes, generate, outcome_count

DEFAULT_ASSIGNMENT_BUDGET = 2**24
DEFAULT_ENSEMBLE_BUDGET = 10**6
CHUNK = 2**16
THREADS_ENV = "SIMDEGREE_THREADS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


class Mode(enum.Enum):
    EXHAUSTIVE = "exhaustive_ensemble"
    MONTE_CARLO = "monte_carlo"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, Mode):
            return value
        aliases = {"exhaustive": cls.EXHAUSTIVE, "mc": cls.MONTE_CARLO}
        return aliases.get(value) or cls(value)


# ---------------------------------------------------------------------------
# Assignment space

def assignment_digits(n: int, d: int, lo: int = 0, hi: int | None = None) -> np.ndarray:
    """Rows are assignments of rank lo..hi-1; variable 0 is most significant."""
    hi = d**n if hi is None else hi
    ranks = np.arange(lo, hi, dtype=np.int64)
    out = np.empty((ranks.size, n), dtype=np.int64)
    for v in range(n - 1, -1, -1):
        ranks, out[:, v] = np.divmod(ranks, d)
    return out


def _constraint_mask(c, d: int, digits: np.ndarray) -> np.ndarray:
    weights = d ** np.arange(c.k - 1, -1, -1, dtype=np.int64)
    ranks = digits[:, list(c.scope)] @ weights
    forbidden = np.array([sum(x * w for x, w in zip(ng, weights)) for ng in c.nogoods])
    return ~np.isin(ranks, forbidden)


def satisfying_mask(inst: Instance, digits: np.ndarray) -> np.ndarray:
    mask = np.ones(digits.shape[0], dtype=bool)
    for c in inst.constraints:
        mask &= _constraint_mask(c, inst.params.d, digits)
    return mask


def _check_assignment_budget(params: ModelParams, budget: int) -> int:
    size = params.d**params.n
    if size > budget:
        raise BudgetError(
            f"assignment space d^n = {size} exceeds budget {budget}",
            required=size, budget=budget,
        )
    return size


def enumerate_solutions(
    inst: Instance,
    budget: int = DEFAULT_ASSIGNMENT_BUDGET,
    workers: int | None = None,
) -> list[tuple[int, ...]]:
    """All solutions of ``inst`` in ascending mixed-radix order."""
    p = inst.params
    size = _check_assignment_budget(p, budget)
    ranges = [(lo, min(lo + CHUNK, size)) for lo in range(0, size, CHUNK)]

    def scan(bounds):
        digits = assignment_digits(p.n, p.d, *bounds)
        return digits[satisfying_mask(inst, digits)]

    workers = workers or default_workers()
    if workers > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(scan, ranges))
    else:
        parts = [scan(b) for b in ranges]
    return [tuple(int(x) for x in row) for part in parts for row in part]


# ---------------------------------------------------------------------------
# Histograms

@dataclass(frozen=True)
class SimilarityHistogram:
    """Ordered satisfying pairs counted by similarity number S = 0..n."""

    n: int
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if len(self.counts) != self.n + 1:
            raise ParameterError(f"histogram length {len(self.counts)} != n+1")
        total = sum(self.counts)
        N = math.isqrt(total)
        if N * N != total or self.counts[self.n] < N or min(self.counts) < 0:
            raise ParameterError(f"counts {self.counts} are not a pair histogram")

    @property
    def solution_count(self) -> int:
        return math.isqrt(sum(self.counts))


def _pairwise_counts(sol: np.ndarray, n: int) -> np.ndarray:
    counts = np.zeros(n + 1, dtype=np.int64)
    rows = [tuple(r) for r in sol]
    for a in rows:
        for b in rows:
            counts[sum(1 for x, y in zip(a, b) if x == y)] += 1
    return counts


def _coordinate_counts(sol: np.ndarray, n: int, block: int = 2048) -> np.ndarray:
    # S(i, j) = sum over coordinates of [a_il == a_jl], accumulated per coordinate.
    counts = np.zeros(n + 1, dtype=np.int64)
    N = sol.shape[0]
    for start in range(0, N, block):
        rows = sol[start : start + block]
        S = np.zeros((rows.shape[0], N), dtype=np.int32)
        for v in range(n):
            S += rows[:, v, None] == sol[None, :, v]
        counts += np.bincount(S.ravel(), minlength=n + 1)
    return counts


def _histogram_array(sol: np.ndarray, n: int, method: str = "coordinate") -> np.ndarray:
    if sol.shape[0] == 0:
        return np.zeros(n + 1, dtype=np.int64)
    if method == "coordinate":
        return _coordinate_counts(sol, n)
    if method == "pairwise":
        return _pairwise_counts(sol, n)
    raise ParameterError(f"unknown histogram method {method!r}")


def histogram(
    solutions: Sequence[Sequence[int]],
    n: int | None = None,
    method: str = "coordinate",
) -> SimilarityHistogram:
    """Similarity histogram of all ordered pairs drawn from ``solutions``.

    ``method="pairwise"`` walks the pairs one by one; ``"coordinate"``
    vectorizes the same count over coordinates. ``n`` is needed only when
    ``solutions`` is empty.
    """
    if n is None:
        if not solutions:
            raise ParameterError("n is required for an empty solution list")
        n = len(solutions[0])
    if any(len(a) != n for a in solutions):
        raise ParameterError("solutions have mixed dimensions")
    sol = np.asarray(solutions, dtype=np.int64).reshape(len(solutions), n)
    return SimilarityHistogram(n, tuple(_histogram_array(sol, n, method)))


# ---------------------------------------------------------------------------
# Ensembles

@dataclass(frozen=True)
class EnsembleEstimate:
    params: ModelParams
    mean_counts: np.ndarray
    std_err: np.ndarray
    instances_sampled: int
    mode: Mode
    second_moment: float
    second_moment_std_err: float
    seed: int | None = None
    manifest: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["S", "s", "count_or_mean", "std_err"])
        n = self.params.n
        for S in range(n + 1):
            w.writerow([S, fmt(S / n), fmt(self.mean_counts[S]), fmt(self.std_err[S])])
        return buf.getvalue()

    def manifest_json(self) -> str:
        return json.dumps(self.manifest, indent=2, sort_keys=True)


def _exhaustive(params: ModelParams, budget: int, a_budget: int):
    size = outcome_count(params) ** params.t
    if size > budget:
        raise BudgetError(
            f"instance ensemble has {size} equiprobable members, budget is {budget}",
            required=size, budget=budget,
        )
    _check_assignment_budget(params, a_budget)
    digits = assignment_digits(params.n, params.d)
    outcomes = [_constraint_mask(c, params.d, digits) for c in constraint_outcomes(params)]
    total = np.zeros(params.n + 1, dtype=np.int64)

    # Depth-first walk of the t-fold product, AND-ing masks along the way.
    def walk(depth: int, mask: np.ndarray):
        nonlocal total
        if depth == params.t:
            total += _histogram_array(digits[mask], params.n)
            return
        for m in outcomes:
            walk(depth + 1, mask & m)

    walk(0, np.ones(digits.shape[0], dtype=bool))
    return total, size


def _mc_chunk(params: ModelParams, seeds: range, digits: np.ndarray):
    s1 = np.zeros(params.n + 1, dtype=np.int64)
    s2 = np.zeros(params.n + 1, dtype=np.int64)
    tot1 = tot2 = 0
    for seed in seeds:
        inst = generate(params, seed)
        h = _histogram_array(digits[satisfying_mask(inst, digits)], params.n)
        s1 += h
        s2 += h * h
        N2 = int(h.sum())
        tot1 += N2
        tot2 += N2 * N2
    return s1, s2, tot1, tot2


def ensemble_expected_counts(
    params: ModelParams,
    mode="exhaustive_ensemble",
    budget: int = DEFAULT_ENSEMBLE_BUDGET,
    samples: int = 10_000,
    seed: int = 0,
    assignment_budget: int = DEFAULT_ASSIGNMENT_BUDGET,
    workers: int | None = None,
) -> EnsembleEstimate:
    """Mean similarity histogram over the Model GB instance distribution.

    In exhaustive mode ``budget`` caps the number of equiprobable instances
    walked; in Monte Carlo mode ``samples`` instances with seeds
    ``seed .. seed+samples-1`` are drawn.
    """
    mode = Mode.parse(mode)
    n = params.n
    manifest = {
        "params": params.as_dict(), "mode": mode.value,
        "budget": budget, "assignment_budget": assignment_budget,
    }
    if mode is Mode.EXHAUSTIVE:
        total, size = _exhaustive(params, budget, assignment_budget)
        mean = total / size
        manifest["instances"] = size
        return EnsembleEstimate(
            params, mean, np.zeros(n + 1), size, mode,
            second_moment=float(total.sum()) / size, second_moment_std_err=0.0,
            manifest=manifest,
        )

    if samples < 2:
        raise ParameterError("Monte Carlo mode needs at least 2 samples")
    _check_assignment_budget(params, assignment_budget)
    digits = assignment_digits(params.n, params.d)
    workers = workers or default_workers()
    step = math.ceil(samples / workers)
    chunks = [range(seed + i, seed + min(i + step, samples)) for i in range(0, samples, step)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda c: _mc_chunk(params, c, digits), chunks))
    else:
        parts = [_mc_chunk(params, c, digits) for c in chunks]
    s1 = sum(int_vec(p[0]) for p in parts)
    s2 = sum(int_vec(p[1]) for p in parts)
    t1 = sum(p[2] for p in parts)
    t2 = sum(p[3] for p in parts)
    mean = np.array([x / samples for x in s1], dtype=float)
    # Exact integer numerator of the unbiased sample variance.
    denom = samples * (samples - 1)
    var = np.array([(samples * b - a * a) / denom for a, b in zip(s1, s2)], dtype=float)
    var2 = (samples * t2 - t1 * t1) / denom
    manifest.update({"samples": samples, "seeds": [seed, seed + samples - 1]})
    return EnsembleEstimate(
        params, mean, np.sqrt(var / samples), samples, mode,
        second_moment=t1 / samples, second_moment_std_err=math.sqrt(var2 / samples),
        seed=seed, manifest=manifest,
    )


def int_vec(a: np.ndarray) -> np.ndarray:
    # Python-int object arrays keep chunk merging exact and order independent.
    return np.array([int(x) for x in a], dtype=object)


def empirical_avg_similarity(est: EnsembleEstimate) -> float:
    mean = np.asarray(est.mean_counts, dtype=float)
    total = mean.sum()
    if not total > 0:
        raise UndefinedAverageError("average similarity undefined: zero total mass")
    n = est.params.n
    return float(np.dot(np.arange(n + 1) / n, mean) / total)


# ---------------------------------------------------------------------------
# Comparison against the closed form

@dataclass(frozen=True)
class ComparisonRow:
    S: int
    exact: float
    mean: float
    std_err: float
    rel_err: float
    z: float


def compare(est: EnsembleEstimate, profile: PairCountProfile) -> list[ComparisonRow]:
    """Per-S relative errors and z-scores of ``est`` against ``profile``."""
    exact = profile.linear()
    rows = []
    for S in range(est.params.n + 1):
        e, m, se = float(exact[S]), float(est.mean_counts[S]), float(est.std_err[S])
        rel = abs(m - e) / abs(e) if e != 0 else (0.0 if m == 0 else math.inf)
        if se > 0:
            z = (m - e) / se
        else:
            z = 0.0 if rel <= 1e-9 else math.inf
        rows.append(ComparisonRow(S, e, m, se, rel, z))
    return rows


def comparison_passes(
    rows: Sequence[ComparisonRow], mode, rel_tol: float = 1e-9, z_max: float = 3.0
) -> bool:
    if Mode.parse(mode) is Mode.EXHAUSTIVE:
        return all(r.rel_err < rel_tol for r in rows)
    return all(abs(r.z) < z_max for r in rows)
