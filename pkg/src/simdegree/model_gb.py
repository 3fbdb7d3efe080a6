"""Model GB random CSP instances.

An instance has ``t`` constraints drawn independently (with repetition).
Each constraint binds a uniform k-subset of the ``n`` variables and forbids
``q`` distinct value tuples (nogoods) chosen uniformly from the ``d**k``
possible tuples. Random k-SAT is the special case ``d = 2, q = 1``.

Tuples are addressed by their mixed-radix rank: the first scope variable is
the most significant digit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import comb
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError

RNG_ALGORITHM = "numpy-PCG64/Generator.choice-v1"
FORMAT_VERSION = 1

Assignment = tuple[int, ...]


@dataclass(frozen=True)
class ModelParams:
    n: int
    d: int
    k: int
    q: int
    t: int

    def __post_init__(self):
        for name in ("n", "d", "k", "q", "t"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ParameterError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.n < 1:
            raise ParameterError(f"n must be >= 1 (got n={self.n})")
        if self.d < 2:
            raise ParameterError(f"d must be >= 2 (got d={self.d})")
        if self.k < 2:
            raise ParameterError(f"k must be >= 2 (got k={self.k})")
        if self.k > self.n:
            raise ParameterError(f"k must be <= n (got k={self.k}, n={self.n})")
        if self.q < 1:
            raise ParameterError(f"q must be >= 1 (got q={self.q})")
        if self.q >= self.d ** (self.k - 1):
            raise ParameterError(
                f"q must be < d^(k-1) = {self.d ** (self.k - 1)} (got q={self.q})"
            )
        if self.t < 0:
            raise ParameterError(f"t must be >= 0 (got t={self.t})")

    @property
    def r(self) -> float:
        """Constraint density t/n."""
        return self.t / self.n

    @property
    def tuple_count(self) -> int:
        return self.d**self.k

    def as_dict(self) -> dict:
        return {"n": self.n, "d": self.d, "k": self.k, "q": self.q, "t": self.t}


def ksat_params(n: int, k: int, t: int) -> ModelParams:
    """Model GB parameters of random k-SAT (d=2, q=1)."""
    return ModelParams(n=n, d=2, k=k, q=1, t=t)


def tuple_rank(values: Sequence[int], d: int) -> int:
    rank = 0
    for v in values:
        rank = rank * d + int(v)
    return rank


def tuple_unrank(rank: int, d: int, k: int) -> tuple[int, ...]:
    digits = [0] * k
    for i in range(k - 1, -1, -1):
        rank, digits[i] = divmod(rank, d)
    return tuple(digits)


@dataclass(frozen=True)
class Constraint:
    scope: tuple[int, ...]
    nogoods: frozenset[tuple[int, ...]]

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(int(v) for v in self.scope))
        object.__setattr__(
            self, "nogoods", frozenset(tuple(int(x) for x in ng) for ng in self.nogoods)
        )
        if len(set(self.scope)) != len(self.scope):
            raise ParameterError(f"scope entries must be distinct: {self.scope}")
        k = len(self.scope)
        for ng in self.nogoods:
            if len(ng) != k:
                raise ParameterError(f"nogood {ng} does not match scope arity {k}")

    @property
    def k(self) -> int:
        return len(self.scope)

    def canonical(self) -> "Constraint":
        """Same constraint with the scope sorted ascending."""
        order = sorted(range(self.k), key=lambda i: self.scope[i])
        return Constraint(
            scope=tuple(self.scope[i] for i in order),
            nogoods=frozenset(tuple(ng[i] for i in order) for ng in self.nogoods),
        )

    def sorted_nogoods(self, d: int) -> list[tuple[int, ...]]:
        return sorted(self.nogoods, key=lambda ng: tuple_rank(ng, d))

    def check(self, params: ModelParams) -> None:
        if self.k != params.k:
            raise ParameterError(f"constraint arity {self.k} != k={params.k}")
        if any(v < 0 or v >= params.n for v in self.scope):
            raise ParameterError(f"scope {self.scope} outside [0, {params.n})")
        if len(self.nogoods) != params.q:
            raise ParameterError(
                f"constraint carries {len(self.nogoods)} nogoods, expected q={params.q}"
            )
        for ng in self.nogoods:
            if any(x < 0 or x >= params.d for x in ng):
                raise ParameterError(f"nogood {ng} outside [0, {params.d})")

    def satisfied_by(self, a: Sequence[int]) -> bool:
        return tuple(a[v] for v in self.scope) not in self.nogoods


@dataclass(frozen=True)
class Instance:
    params: ModelParams
    constraints: tuple[Constraint, ...]
    seed: int | None = None
    rng_algorithm: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if len(self.constraints) != self.params.t:
            raise ParameterError(
                f"instance has {len(self.constraints)} constraints, expected t={self.params.t}"
            )
        for c in self.constraints:
            c.check(self.params)

    def to_dict(self) -> dict:
        d = self.params.d
        return {
            "version": FORMAT_VERSION,
            "params": self.params.as_dict(),
            "rng": {"algorithm": self.rng_algorithm, "seed": self.seed},
            "constraints": [
                {"scope": list(c.scope), "nogoods": [list(ng) for ng in c.sorted_nogoods(d)]}
                for c in self.constraints
            ],
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, doc: dict) -> "Instance":
        if doc.get("version") != FORMAT_VERSION:
            raise ParameterError(f"unsupported instance format version {doc.get('version')!r}")
        params = ModelParams(**doc["params"])
        rng = doc.get("rng") or {}
        constraints = [
            Constraint(scope=c["scope"], nogoods=[tuple(ng) for ng in c["nogoods"]])
            for c in doc["constraints"]
        ]
        return cls(params, tuple(constraints), seed=rng.get("seed"), rng_algorithm=rng.get("algorithm"))

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        return cls.from_dict(json.loads(text))

    def to_dimacs(self) -> str:
        """DIMACS CNF text; only defined for k-SAT instances (d=2, q=1).

        The single nogood of a constraint becomes the clause that excludes
        it: a variable forbidden at 0 appears positive, one forbidden at 1
        appears negated. Variable ``v`` is DIMACS variable ``v + 1``.
        """
        p = self.params
        if p.d != 2 or p.q != 1:
            raise ParameterError(f"DIMACS export needs d=2, q=1 (got d={p.d}, q={p.q})")
        lines = [f"p cnf {p.n} {p.t}"]
        for c in self.constraints:
            (ng,) = c.nogoods
            lits = [(v + 1) if x == 0 else -(v + 1) for v, x in zip(c.scope, ng)]
            lines.append(" ".join(map(str, lits)) + " 0")
        return "\n".join(lines) + "\n"


def _check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ParameterError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ParameterError(f"seed must lie in [0, 2^64) (got {seed})")
    return seed


def generate(params: ModelParams, seed: int) -> Instance:
    """Draw a Model GB instance; a pure function of ``(params, seed)``.

    Each constraint draws an ordered k-sample of variables and ``q`` distinct
    tuple ranks from ``range(d**k)``, then is canonicalized (scope ascending,
    nogood components permuted to match).
    """
    seed = _check_seed(seed)
    rng = np.random.Generator(np.random.PCG64(seed))
    n, d, k, q = params.n, params.d, params.k, params.q
    constraints = []
    for _ in range(params.t):
        scope = rng.choice(n, size=k, replace=False)
        ranks = rng.choice(d**k, size=q, replace=False)
        c = Constraint(
            scope=tuple(int(v) for v in scope),
            nogoods=frozenset(tuple_unrank(int(x), d, k) for x in ranks),
        )
        constraints.append(c.canonical())
    return Instance(params, tuple(constraints), seed=seed, rng_algorithm=RNG_ALGORITHM)


def _check_assignment(params: ModelParams, a: Sequence[int]) -> None:
    if len(a) != params.n:
        raise ParameterError(f"assignment has length {len(a)}, expected n={params.n}")
    if any(x < 0 or x >= params.d for x in a):
        raise ParameterError(f"assignment values must lie in [0, {params.d})")


def is_satisfying(inst: Instance, a: Sequence[int]) -> bool:
    _check_assignment(inst.params, a)
    return all(c.satisfied_by(a) for c in inst.constraints)


def similarity_number(a: Sequence[int], b: Sequence[int]) -> int:
    """Number of coordinates where the two assignments agree."""
    if len(a) != len(b):
        raise ParameterError(f"assignment lengths differ: {len(a)} vs {len(b)}")
    return sum(1 for x, y in zip(a, b) if x == y)


def similarity_degree(a: Sequence[int], b: Sequence[int]) -> float:
    if len(a) == 0:
        raise ParameterError("similarity degree undefined for n = 0")
    return similarity_number(a, b) / len(a)


def constraint_outcomes(params: ModelParams) -> Iterable[Constraint]:
    """Every canonical (scope, nogood-set) a single draw can produce.

    All outcomes are equiprobable: an ordered scope sample maps onto its
    sorted k-subset ``k!`` to one, and nogood sets are uniform q-subsets.
    """
    from itertools import combinations

    n, d, k, q = params.n, params.d, params.k, params.q
    tuples = [tuple_unrank(x, d, k) for x in range(d**k)]
    for scope in combinations(range(n), k):
        for ngs in combinations(tuples, q):
            yield Constraint(scope=scope, nogoods=frozenset(ngs))


def outcome_count(params: ModelParams) -> int:
    return comb(params.n, params.k) * comb(params.d**params.k, params.q)
