import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simdegree.errors import DomainError, UndefinedAverageError
from simdegree.exact_finite import (
    LogValue,
    PairCountProfile,
    avg_similarity_finite,
    concentration_mass,
    expected_sat_pairs,
    log_pair_population,
    log_pair_sat_prob,
    profile_to_csv,
    read_profile_csv,
    second_moment_finite,
)
from simdegree.model_gb import ModelParams

P1 = ModelParams(2, 2, 2, 1, 1)
P2 = ModelParams(2, 2, 2, 1, 2)


# --- independent oracles -------------------------------------------------

def pair_population_bruteforce(n, d):
    counts = [0] * (n + 1)
    for a in itertools.product(range(d), repeat=n):
        for b in itertools.product(range(d), repeat=n):
            counts[sum(x == y for x, y in zip(a, b))] += 1
    return counts


def single_constraint_prob(n, d, k, q, a, b):
    """Exact P(pair (a, b) satisfies one random constraint), by enumeration."""
    tuples = list(itertools.product(range(d), repeat=k))
    good = total = 0
    for scope in itertools.combinations(range(n), k):
        ta = tuple(a[v] for v in scope)
        tb = tuple(b[v] for v in scope)
        for ngs in itertools.combinations(tuples, q):
            total += 1
            good += ta not in ngs and tb not in ngs
    return Fraction(good, total)


# --- population ----------------------------------------------------------

def test_population_examples():
    assert math.exp(log_pair_population(P1, 2).log) == pytest.approx(4, rel=1e-12)
    assert math.exp(log_pair_population(P1, 0).log) == pytest.approx(4, rel=1e-12)
    assert math.exp(log_pair_population(P1, 1).log) == pytest.approx(8, rel=1e-12)
    assert pair_population_bruteforce(2, 2) == [4, 8, 4]


@pytest.mark.parametrize("n,d", [(3, 2), (3, 3), (4, 3), (2, 5)])
def test_population_matches_enumeration(n, d):
    p = ModelParams(n, d, 2, 1, 0)
    brute = pair_population_bruteforce(n, d)
    for S in range(n + 1):
        assert math.exp(log_pair_population(p, S).log) == pytest.approx(brute[S], rel=1e-12)


def test_population_boundaries():
    p = ModelParams(50, 4, 3, 2, 0)
    assert log_pair_population(p, 50).log == pytest.approx(50 * math.log(4), rel=1e-12)
    assert log_pair_population(p, 0).log == pytest.approx(50 * math.log(4) + 50 * math.log(3), rel=1e-12)
    with pytest.raises(DomainError):
        log_pair_population(p, 51)
    with pytest.raises(DomainError):
        log_pair_population(p, -1)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 200), st.integers(2, 5))
def test_population_completeness(n, d):
    p = ModelParams(n, d, 2, 1, 0)
    total = math.log(sum(math.exp(log_pair_population(p, S).log - 2 * n * math.log(d))
                         for S in range(n + 1)))
    assert abs(total) < 1e-9


# --- satisfaction probability --------------------------------------------

def test_sat_prob_examples():
    p0 = ModelParams(2, 2, 2, 1, 0)
    assert all(log_pair_sat_prob(p0, S).log == 0 for S in range(3))
    assert math.exp(log_pair_sat_prob(P1, 2).log) == pytest.approx(0.75, rel=1e-12)
    assert math.exp(log_pair_sat_prob(P1, 1).log) == pytest.approx(0.5, rel=1e-12)


@pytest.mark.parametrize("n,d,k,q", [(2, 2, 2, 1), (3, 2, 2, 1), (4, 2, 3, 3), (3, 3, 2, 2), (4, 3, 3, 4)])
def test_sat_prob_matches_enumeration(n, d, k, q):
    a = (0,) * n
    for S in range(n + 1):
        b = (0,) * S + (1,) * (n - S)
        exact = single_constraint_prob(n, d, k, q, a, b)
        for t in (1, 3):
            p = ModelParams(n, d, k, q, t)
            assert math.exp(log_pair_sat_prob(p, S).log) == pytest.approx(float(exact**t), rel=1e-12)


def test_sat_prob_range_and_monotone_in_t():
    for S in range(0, 31, 5):
        prev = 0.0
        for t in range(0, 200, 17):
            lp = log_pair_sat_prob(ModelParams(30, 3, 4, 10, t), S).log
            assert lp <= 0.0
            assert lp <= prev
            prev = lp


def test_sat_prob_boundary():
    p = ModelParams(40, 3, 3, 5, 77)
    D = 27
    assert log_pair_sat_prob(p, 40).log == pytest.approx(77 * math.log((D - 5) / D), rel=1e-12)


# --- profile ---------------------------------------------------------------

def test_profile_examples():
    assert expected_sat_pairs(P1).linear() == pytest.approx([2, 4, 3], rel=1e-12)
    assert expected_sat_pairs(P2).linear() == pytest.approx([1, 2, 9 / 4], rel=1e-12)
    p0 = ModelParams(7, 3, 2, 1, 0)
    prof = expected_sat_pairs(p0)
    for S in range(8):
        assert prof.log_counts[S] == log_pair_population(p0, S)


def test_avg_similarity_examples():
    assert avg_similarity_finite(expected_sat_pairs(P1)) == pytest.approx(5 / 9, rel=1e-12)
    for n in (1 + 1, 5, 40, 300):
        assert avg_similarity_finite(expected_sat_pairs(ModelParams(n, 2, 2, 1, 0))) == pytest.approx(0.5, rel=1e-12)
    p = ModelParams(4, 2, 2, 1, 0)
    single = PairCountProfile(p, (LogValue.zero(),) * 4 + (LogValue(3.0),))
    assert avg_similarity_finite(single) == 1.0
    with pytest.raises(UndefinedAverageError):
        avg_similarity_finite(PairCountProfile(p, (LogValue.zero(),) * 5))


def test_avg_similarity_t0_general_d():
    # sum_S S C(n,S) (d-1)^(n-S) / (n d^n) = 1/d
    for d in (3, 5):
        assert avg_similarity_finite(expected_sat_pairs(ModelParams(9, d, 2, 1, 0))) == pytest.approx(1 / d, rel=1e-12)


@given(st.floats(-50, 50))
def test_avg_similarity_scale_invariant(shift):
    prof = expected_sat_pairs(ModelParams(25, 3, 3, 4, 40))
    shifted = PairCountProfile(prof.params, tuple(LogValue(v.log + shift) for v in prof.log_counts))
    assert avg_similarity_finite(shifted) == pytest.approx(avg_similarity_finite(prof), rel=1e-12)


def test_second_moment_examples():
    assert second_moment_finite(expected_sat_pairs(P1)).log == pytest.approx(math.log(9), rel=1e-12)
    assert second_moment_finite(expected_sat_pairs(P2)).log == pytest.approx(math.log(21 / 4), rel=1e-12)
    p0 = ModelParams(33, 3, 2, 1, 0)
    assert second_moment_finite(expected_sat_pairs(p0)).log == pytest.approx(66 * math.log(3), rel=1e-12)


def test_concentration_examples():
    prof = expected_sat_pairs(P1)
    assert concentration_mass(prof, 0.5, 1.0) == 1.0
    # window floor(0.8)+1 .. floor(1.2) is S = 1 alone: 4/9 of the total
    assert concentration_mass(prof, 0.5, 0.1) == pytest.approx(4 / 9, rel=1e-12)
    assert concentration_mass(prof, 0.0, 0.1) == pytest.approx(2 / 9, rel=1e-12)
    assert concentration_mass(prof, 0.8, 0.05) == 0.0  # floor(1.5)+1 > floor(1.7)
    with pytest.raises(DomainError):
        concentration_mass(prof, 0.5, 0.0)
    with pytest.raises(DomainError):
        concentration_mass(prof, 1.5, 0.1)


def test_concentration_grows_with_n():
    masses = [concentration_mass(expected_sat_pairs(ModelParams(n, 2, 3, 1, 2 * n)), 0.6, 0.05)
              for n in (100, 400, 1600)]
    assert masses[0] <= masses[1] <= masses[2]


# --- serialization ---------------------------------------------------------

def test_csv_round_trip():
    prof = expected_sat_pairs(ModelParams(12, 3, 3, 4, 30))
    rows = read_profile_csv(profile_to_csv(prof) + "s_av=0.5\n")
    assert [r["S"] for r in rows] == list(range(13))
    for r, v in zip(rows, prof.log_counts):
        assert r["log_E"] == pytest.approx(v.log, rel=1e-11)
        assert r["E"] == pytest.approx(v.exp(), rel=1e-11)


def test_csv_overflow_leaves_linear_blank():
    prof = expected_sat_pairs(ModelParams(3000, 2, 3, 1, 0))
    rows = read_profile_csv(profile_to_csv(prof))
    assert rows[1500]["E"] is None
    assert rows[1500]["log_E"] == pytest.approx(prof.log_counts[1500].log, rel=1e-11)
    assert math.isfinite(avg_similarity_finite(prof))


def test_logvalue():
    assert LogValue.of(0).is_zero
    assert LogValue.of(2.0).exp() == pytest.approx(2.0)
    assert (LogValue.of(2.0) * LogValue.zero()).is_zero
    assert LogValue(1e6).exp() == math.inf
    with pytest.raises(ValueError):
        LogValue.of(-1.0)
