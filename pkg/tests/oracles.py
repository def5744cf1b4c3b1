"""Independent brute-force oracles the tests check the library against.

Everything here is deliberately written from the definitions, not from the
library's implementations: subset enumeration for the Smith set, full
permutation enumeration for Kemeny, integer signed-contribution sums for
assorter means, and a direct-product version of the sequential test.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from condaudit import (
    Election,
    FullHandCount,
    PairwisePositive,
    RankingComparison,
    ScoreComparison,
)


def brute_force_smith(score_matrix: np.ndarray) -> frozenset[int]:
    """Smallest candidate set all of whose members strictly beat all outsiders."""
    s = np.asarray(score_matrix)
    k = s.shape[0]
    for size in range(1, k + 1):
        found = [
            set(sub)
            for sub in itertools.combinations(range(k), size)
            if all(s[c, o] > 0 for c in sub for o in range(k) if o not in sub)
        ]
        if found:
            assert len(found) == 1, "dominant sets of one size should be unique"
            return frozenset(found[0])
    return frozenset(range(k))


def brute_force_kemeny(tallies: np.ndarray) -> tuple[tuple[int, ...], int]:
    """Highest-scoring complete ranking, lexicographically earliest on ties."""
    t = np.asarray(tallies)
    k = t.shape[0]
    best_ranking = None
    best_score = None
    for perm in itertools.permutations(range(k)):
        score = sum(
            int(t[perm[p], perm[q]]) for p in range(k) for q in range(p + 1, k)
        )
        if best_score is None or score > best_score:
            best_ranking, best_score = perm, score
    return best_ranking, best_score


def ranking_tally(ranking, tallies: np.ndarray) -> int:
    t = np.asarray(tallies)
    k = len(ranking)
    return sum(int(t[ranking[p], ranking[q]]) for p in range(k) for q in range(p + 1, k))


def _ballot_prefers(ballot, i, j) -> bool:
    if i in ballot:
        return j not in ballot or ballot.index(i) < ballot.index(j)
    return False


def signed_contribution(assertion, ballot) -> int:
    """Integer signed indicator sum g for one ballot, from the definitions."""
    if isinstance(assertion, PairwisePositive):
        w, l = assertion.winner, assertion.loser
        return int(_ballot_prefers(ballot, w, l)) - int(_ballot_prefers(ballot, l, w))
    if isinstance(assertion, ScoreComparison):
        (i, j), (c, w) = assertion.hi, assertion.lo
        return (
            int(_ballot_prefers(ballot, i, j))
            + int(_ballot_prefers(ballot, w, c))
            - int(_ballot_prefers(ballot, c, w))
            - int(_ballot_prefers(ballot, j, i))
        )
    if isinstance(assertion, RankingComparison):
        total = 0
        for ranking, sign in ((assertion.preferred, 1), (assertion.other, -1)):
            for p, x in enumerate(ranking):
                for y in ranking[p + 1:]:
                    if _ballot_prefers(ballot, x, y):
                        total += sign
        return total
    raise TypeError(f"no contribution for {assertion!r}")


def normalizer(assertion) -> int:
    """-2a for the assertion's proto-assorter: the mean shift denominator."""
    if isinstance(assertion, PairwisePositive):
        return 2
    if isinstance(assertion, ScoreComparison):
        return 4
    if isinstance(assertion, RankingComparison):
        k = len(assertion.preferred)
        return k * (k - 1)
    raise TypeError(f"no normalizer for {assertion!r}")


def weighted_g_sum(assertion, election: Election) -> int:
    return sum(
        count * signed_contribution(assertion, sig)
        for sig, count in election.profile.items()
    )


def claim_margin(assertion, tallies: np.ndarray) -> int:
    """Exact tally margin of the claimed inequality (positive iff it holds)."""
    t = np.asarray(tallies)
    if isinstance(assertion, PairwisePositive):
        return int(t[assertion.winner, assertion.loser] - t[assertion.loser, assertion.winner])
    if isinstance(assertion, ScoreComparison):
        (i, j), (c, w) = assertion.hi, assertion.lo
        s = t - t.T
        return int(s[i, j] - s[c, w])
    if isinstance(assertion, RankingComparison):
        return ranking_tally(assertion.preferred, t) - ranking_tally(assertion.other, t)
    raise TypeError(f"no claim margin for {assertion!r}")


def independent_kk(xs, population, null_mean=0.5, padding=0.1):
    """Direct-product transcription of the sequential test; returns p per draw."""
    padded_sum = 0.0
    mart = 1.0
    peak = 0.0
    ps = []
    for n, x in enumerate(xs):
        y = x + padding
        m = (population * (null_mean + padding) - padded_sum) / (population - n)
        if m <= 0:
            mart = math.inf
        elif mart != math.inf:
            mart = mart * (y / m)
        peak = max(peak, mart)
        ps.append(1.0 if peak == 0 else min(1.0, 1.0 / peak))
        padded_sum += y
    return ps


def random_election(rng: np.random.Generator, max_k: int = 6, max_signatures: int = 9,
                    max_count: int = 60) -> Election:
    """Small random election: partial rankings with integer counts."""
    k = int(rng.integers(1, max_k + 1))
    names = tuple("ABCDEFGH"[:k])
    profile: dict[tuple[int, ...], int] = {}
    for _ in range(int(rng.integers(0, max_signatures + 1))):
        size = int(rng.integers(0, k + 1))
        sig = tuple(int(c) for c in rng.permutation(k)[:size])
        count = int(rng.integers(1, max_count + 1))
        profile[sig] = profile.get(sig, 0) + count
    return Election(names, profile)


def expand(election: Election) -> list[tuple[int, ...]]:
    """The election's ballots as an explicit list."""
    out: list[tuple[int, ...]] = []
    for sig, count in sorted(election.profile.items()):
        out.extend([sig] * count)
    return out
