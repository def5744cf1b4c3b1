"""Audit assertions and their assorters.

An assertion is a claimed inequality over ballot tallies; jointly, a
method's assertion set implies its reported winner won.  Every assertion is
scored per ballot by an *assorter*: a value in [0, 1] whose population mean
exceeds 1/2 exactly when the claimed inequality holds.  The scoring follows
the signed-indicator construction ``h = (g - a) / (-2a)``, where ``g`` sums
the ballot's +/-1 contributions to the tallies being compared and ``a`` is
the minimum of ``g``.

Three claim shapes are supported:

* ``PairwisePositive(w, l)`` — more ballots prefer w over l than l over w.
* ``ScoreComparison(hi, lo)`` — the pairwise margin of ``hi`` exceeds the
  pairwise margin of ``lo``.
* ``RankingComparison(preferred, other)`` — the sum of pairwise tallies
  agreeing with the complete ranking ``preferred`` exceeds that of
  ``other``.

``FullHandCount`` is a sentinel "assertion" marking outcomes no ballot
sample can verify (unresolvable ties, capacity limits); it always escalates.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .model import Ballot, Election, prefers
from .tabulation import (
    CapacityError,
    KemenyResult,
    MinimaxResult,
    RankedPairsResult,
    SmithResult,
    minimax_tabulate,
)


class SchemaError(ValueError):
    """Malformed or inconsistent assertion-set document."""


@dataclass(frozen=True)
class PairwisePositive:
    winner: int
    loser: int

    def __post_init__(self):
        if self.winner == self.loser:
            raise ValueError("pairwise assertion needs two distinct candidates")


@dataclass(frozen=True)
class ScoreComparison:
    hi: tuple[int, int]
    lo: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "hi", tuple(self.hi))
        object.__setattr__(self, "lo", tuple(self.lo))
        for pair in (self.hi, self.lo):
            if len(pair) != 2 or pair[0] == pair[1]:
                raise ValueError(f"malformed candidate pair {pair}")
        if self.hi == self.lo:
            raise ValueError("score comparison needs two distinct ordered pairs")


@dataclass(frozen=True)
class RankingComparison:
    preferred: tuple[int, ...]
    other: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "preferred", tuple(self.preferred))
        object.__setattr__(self, "other", tuple(self.other))
        for ranking in (self.preferred, self.other):
            if len(set(ranking)) != len(ranking):
                raise ValueError("rankings may not repeat candidates")
        if set(self.preferred) != set(self.other):
            raise ValueError("rankings must cover the same candidates")
        if not self.preferred or self.preferred[0] == self.other[0]:
            raise ValueError("compared rankings must start with different candidates")


@dataclass(frozen=True)
class FullHandCount:
    reason: str = ""


Assertion = Union[PairwisePositive, ScoreComparison, RankingComparison, FullHandCount]


@dataclass
class AssertionSet:
    """A method's assertions for one reported outcome.

    ``winner`` is None only for full-hand-count outcomes.  A set containing
    a ``FullHandCount`` contains nothing else.
    """

    method: str
    winner: int | None
    assertions: tuple[Assertion, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.assertions = tuple(self.assertions)
        if any(isinstance(a, FullHandCount) for a in self.assertions) and len(self.assertions) != 1:
            raise ValueError("a full-hand-count sentinel must be the set's only member")

    @property
    def full_hand_count(self) -> bool:
        return any(isinstance(a, FullHandCount) for a in self.assertions)


# ---------------------------------------------------------------------------
# Assorters


def assorter_value(assertion: Assertion, ballot: Ballot) -> float:
    """Score one ballot for an assertion; always in [0, 1].

    A ballot expressing none of the compared preferences scores exactly 1/2.
    """
    if isinstance(assertion, PairwisePositive):
        w, l = assertion.winner, assertion.loser
        g = int(prefers(ballot, w, l)) - int(prefers(ballot, l, w))
        return (g + 1) / 2
    if isinstance(assertion, ScoreComparison):
        (i, j), (k, l) = assertion.hi, assertion.lo
        g = (
            int(prefers(ballot, i, j))
            + int(prefers(ballot, l, k))
            - int(prefers(ballot, k, l))
            - int(prefers(ballot, j, i))
        )
        return (g + 2) / 4
    if isinstance(assertion, RankingComparison):
        k = len(assertion.preferred)
        pair_count = k * (k - 1) // 2
        g = _agreement(assertion.preferred, ballot) - _agreement(assertion.other, ballot)
        return (g + pair_count) / (2 * pair_count)
    if isinstance(assertion, FullHandCount):
        raise ValueError("a full-hand-count sentinel has no assorter")
    raise TypeError(f"not an assertion: {assertion!r}")


def _agreement(ranking: Sequence[int], ballot: Ballot) -> int:
    """Number of the ranking's ordered pairs the ballot agrees with."""
    agree = 0
    for p, x in enumerate(ranking):
        for y in ranking[p + 1:]:
            if prefers(ballot, x, y):
                agree += 1
    return agree


def assorter_mean(assertion: Assertion, election: Election) -> float:
    """Population mean of the assorter over every ballot in the election."""
    total = election.total_ballots
    if total == 0:
        return 0.5
    acc = 0.0
    for sig, count in election.profile.items():
        acc += count * assorter_value(assertion, sig)
    return acc / total


# ---------------------------------------------------------------------------
# Per-method assertion generation


def _dedupe(assertions: Sequence[Assertion]) -> tuple[Assertion, ...]:
    seen: set[Assertion] = set()
    out: list[Assertion] = []
    for a in assertions:
        if a not in seen:
            seen.add(a)
            out.append(a)
    return tuple(out)


def condorcet_assertions(winner: int, num_candidates: int, method: str = "condorcet") -> AssertionSet:
    """The k-1 pairwise claims that the winner beats every other candidate."""
    if num_candidates < 2:
        raise ValueError("condorcet assertions need at least two candidates")
    if not 0 <= winner < num_candidates:
        raise ValueError(f"winner index {winner} out of range")
    assertions = tuple(
        PairwisePositive(winner, c) for c in range(num_candidates) if c != winner
    )
    return AssertionSet(method, winner, assertions)


def ranked_pairs_assertions(rp: RankedPairsResult) -> AssertionSet:
    """Assertions verifying a Ranked Pairs outcome.

    Two groups: a positive-majority claim for each committed pair led by the
    winner, and, for each preference the winner holds only through a path,
    claims that every pair on the path outscores the opposing pair.
    """
    if rp.winner is None:
        return AssertionSet("ranked-pairs", None, (FullHandCount(rp.reason or "unresolved tie"),))
    w = rp.winner
    out: list[Assertion] = []
    for pair in rp.commits:
        if pair.winner == w:
            out.append(PairwisePositive(w, pair.loser))
    for inf in rp.inferences:
        if inf.winner != w:
            continue
        c = inf.loser
        for (i, j) in inf.basis:
            out.append(ScoreComparison((i, j), (c, w)))
    return AssertionSet("ranked-pairs", w, _dedupe(out))


def minimax_assertions(mm: MinimaxResult, score_matrix: np.ndarray) -> AssertionSet:
    """Assertions verifying a Minimax (margins) outcome.

    With a Condorcet winner this is the plain winner-beats-all set.
    Otherwise the winner's strongest defeat is compared against their other
    losses, and against the strongest defeat of every other candidate.
    """
    s = np.asarray(score_matrix)
    k = s.shape[0]
    if mm.winner is None:
        return AssertionSet("minimax", None, (FullHandCount(mm.reason or "tie"),))
    w = mm.winner
    if k == 1:
        return AssertionSet("minimax", w, ())
    if mm.condorcet_case:
        return condorcet_assertions(w, k, method="minimax")
    d_w = mm.strongest_defeater.get(w)
    if d_w is None or any(x != w and x not in mm.strongest_defeater for x in range(k)):
        # Some candidate has no strict loss, so a strongest defeat cannot be
        # named for it and the margin comparisons below cannot be formed.
        return AssertionSet(
            "minimax", None,
            (FullHandCount("a candidate has no strict pairwise loss to compare"),),
        )
    out: list[Assertion] = []
    for c in range(k):
        if c != w and c != d_w:
            out.append(ScoreComparison((d_w, w), (c, w)))
    for x in range(k):
        if x == w:
            continue
        out.append(ScoreComparison((mm.strongest_defeater[x], x), (d_w, w)))
    return AssertionSet("minimax", w, _dedupe(out))


def smith_assertions(
    sm: SmithResult,
    num_candidates: int,
    inner: str = "minimax",
    *,
    score_matrix: np.ndarray | None = None,
    imported: AssertionSet | None = None,
) -> AssertionSet:
    """Assertions verifying a Smith-set outcome plus an inner winner.

    Stage one claims every member beats every non-member; stage two claims
    each member is beaten by the in-set opponent with the largest margin,
    which shows no member can be dropped.  The winner among the members is
    then justified by inner assertions: Minimax assertions computed over the
    member-restricted margins (``inner="minimax"``), or an externally
    supplied set over the members (``inner="irv-import"``).
    """
    if inner not in ("minimax", "irv-import"):
        raise ValueError(f"inner method must be 'minimax' or 'irv-import', got {inner!r}")
    method = "smith-minimax" if inner == "minimax" else "smith-irv"
    members = sm.smith_set
    if inner == "irv-import" and imported is not None and not imported.full_hand_count:
        mentioned: set[int] = set()
        for a in imported.assertions:
            mentioned |= _candidates_of(a)
        if imported.winner is None or imported.winner not in members or not mentioned <= set(members):
            raise ValueError("imported inner assertions must be over Smith-set members only")
    if sm.tie_flag:
        return AssertionSet(method, None, (FullHandCount("pairwise tie within the Smith set"),))

    stage1: list[Assertion] = [
        PairwisePositive(c, o)
        for c in members
        for o in range(num_candidates)
        if o not in members
    ]
    if len(members) == 1:
        return AssertionSet(method, members[0], tuple(stage1))

    stage2: list[Assertion] = []
    for c in members:
        if c not in sm.inner_defeats:
            return AssertionSet(
                method, None,
                (FullHandCount("a Smith-set member has no in-set defeat"),),
            )
        stage2.append(PairwisePositive(sm.inner_defeats[c][0], c))

    if inner == "minimax":
        if score_matrix is None:
            raise ValueError("inner minimax needs the election's score matrix")
        s = np.asarray(score_matrix)
        sub = s[np.ix_(members, members)]
        inner_mm = minimax_tabulate(sub)
        inner_set = minimax_assertions(inner_mm, sub)
        if inner_set.full_hand_count:
            reason = inner_set.assertions[0].reason
            return AssertionSet(method, None, (FullHandCount(f"inner minimax: {reason}"),))
        winner = members[inner_set.winner]
        inner_assertions = [_relabel(a, members) for a in inner_set.assertions]
    else:
        if imported is None:
            raise ValueError("inner 'irv-import' needs an imported assertion set over the Smith set")
        if imported.full_hand_count:
            return AssertionSet(method, None, (FullHandCount("imported inner set escalates"),))
        winner = imported.winner
        inner_assertions = list(imported.assertions)

    return AssertionSet(method, winner, _dedupe(stage1 + stage2 + inner_assertions))


def _relabel(assertion: Assertion, mapping: Sequence[int]) -> Assertion:
    """Map an assertion's local candidate indices through ``mapping``."""
    if isinstance(assertion, PairwisePositive):
        return PairwisePositive(mapping[assertion.winner], mapping[assertion.loser])
    if isinstance(assertion, ScoreComparison):
        return ScoreComparison(
            (mapping[assertion.hi[0]], mapping[assertion.hi[1]]),
            (mapping[assertion.lo[0]], mapping[assertion.lo[1]]),
        )
    if isinstance(assertion, RankingComparison):
        return RankingComparison(
            tuple(mapping[c] for c in assertion.preferred),
            tuple(mapping[c] for c in assertion.other),
        )
    return assertion


def _candidates_of(assertion: Assertion) -> set[int]:
    if isinstance(assertion, PairwisePositive):
        return {assertion.winner, assertion.loser}
    if isinstance(assertion, ScoreComparison):
        return set(assertion.hi) | set(assertion.lo)
    if isinstance(assertion, RankingComparison):
        return set(assertion.preferred) | set(assertion.other)
    return set()


def kemeny_assertions(kr: KemenyResult, k_limit: int = 8) -> AssertionSet:
    """One ranking-tally comparison per complete ranking led by a different candidate.

    The count grows as k! - (k-1)!, so k is capped (`k_limit`); beyond it a
    :class:`CapacityError` is raised rather than emitting an impractical set.
    """
    ranking = kr.best_ranking
    k = len(ranking)
    if k > k_limit:
        raise CapacityError(
            f"kemeny audit over {k} candidates needs {k}!-({k}-1)! assertions; limit is {k_limit}"
        )
    if k == 1:
        return AssertionSet("kemeny", kr.winner, ())
    out = [
        RankingComparison(ranking, perm)
        for perm in itertools.permutations(range(k))
        if perm[0] != kr.winner
    ]
    return AssertionSet("kemeny", kr.winner, tuple(out))


# ---------------------------------------------------------------------------
# JSON interchange

_TYPE_TAGS = {
    PairwisePositive: "pairwise_positive",
    ScoreComparison: "score_comparison",
    RankingComparison: "ranking_comparison",
    FullHandCount: "full_hand_count",
}


def describe(assertion: Assertion, names: Sequence[str]) -> str:
    """Human-readable one-liner for an assertion, using candidate names."""
    if isinstance(assertion, PairwisePositive):
        return f"s({names[assertion.winner]},{names[assertion.loser]}) > 0"
    if isinstance(assertion, ScoreComparison):
        (i, j), (k, l) = assertion.hi, assertion.lo
        return f"s({names[i]},{names[j]}) > s({names[k]},{names[l]})"
    if isinstance(assertion, RankingComparison):
        a = ",".join(names[c] for c in assertion.preferred)
        b = ",".join(names[c] for c in assertion.other)
        return f"T([{a}]) > T([{b}])"
    if isinstance(assertion, FullHandCount):
        return f"full hand count: {assertion.reason}" if assertion.reason else "full hand count"
    raise TypeError(f"not an assertion: {assertion!r}")


def export_assertions(aset: AssertionSet, election: Election) -> dict:
    """Assertion-set document with candidate indices resolved to names."""
    names = election.candidates

    def enc(a: Assertion) -> dict:
        if isinstance(a, PairwisePositive):
            return {"type": "pairwise_positive", "winner": names[a.winner], "loser": names[a.loser]}
        if isinstance(a, ScoreComparison):
            return {
                "type": "score_comparison",
                "hi": [names[a.hi[0]], names[a.hi[1]]],
                "lo": [names[a.lo[0]], names[a.lo[1]]],
            }
        if isinstance(a, RankingComparison):
            return {
                "type": "ranking_comparison",
                "preferred": [names[c] for c in a.preferred],
                "other": [names[c] for c in a.other],
            }
        return {"type": "full_hand_count", "reason": a.reason}

    metadata = dict(aset.metadata)
    metadata.setdefault("election_sha256", election.digest())
    return {
        "method": aset.method,
        "winner": None if aset.winner is None else names[aset.winner],
        "assertions": [enc(a) for a in aset.assertions],
        "metadata": metadata,
    }


def export_assertions_json(aset: AssertionSet, election: Election) -> str:
    return json.dumps(export_assertions(aset, election), indent=2)


def import_assertions(doc: dict | str, election: Election, verify_digest: bool = True) -> AssertionSet:
    """Load an assertion-set document, resolving names against the election.

    Unknown candidates or type tags raise :class:`SchemaError`.  When the
    document carries an election digest and ``verify_digest`` is set, a
    mismatch with this election is an error.
    """
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise SchemaError("assertion document must be an object")
    index = {name: i for i, name in enumerate(election.candidates)}

    def resolve(name) -> int:
        if name not in index:
            raise SchemaError(f"unknown candidate name {name!r}")
        return index[name]

    method = doc.get("method")
    if not isinstance(method, str):
        raise SchemaError("'method' must be a string")
    raw_winner = doc.get("winner")
    winner = None if raw_winner is None else resolve(raw_winner)

    assertions: list[Assertion] = []
    entries = doc.get("assertions")
    if not isinstance(entries, list):
        raise SchemaError("'assertions' must be a list")
    for entry in entries:
        if not isinstance(entry, dict):
            raise SchemaError("each assertion must be an object")
        tag = entry.get("type")
        try:
            if tag == "pairwise_positive":
                assertions.append(
                    PairwisePositive(resolve(entry["winner"]), resolve(entry["loser"]))
                )
            elif tag == "score_comparison":
                hi, lo = entry["hi"], entry["lo"]
                assertions.append(
                    ScoreComparison(
                        (resolve(hi[0]), resolve(hi[1])),
                        (resolve(lo[0]), resolve(lo[1])),
                    )
                )
            elif tag == "ranking_comparison":
                preferred = tuple(resolve(n) for n in entry["preferred"])
                other = tuple(resolve(n) for n in entry["other"])
                if set(preferred) != set(range(election.num_candidates)):
                    raise SchemaError("ranking comparisons must rank every candidate")
                assertions.append(RankingComparison(preferred, other))
            elif tag == "full_hand_count":
                assertions.append(FullHandCount(entry.get("reason", "")))
            else:
                raise SchemaError(f"unknown assertion type tag {tag!r}")
        except (KeyError, IndexError, TypeError) as exc:
            raise SchemaError(f"malformed {tag or 'assertion'} entry: {exc}") from None
        except ValueError as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(str(exc)) from None

    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        raise SchemaError("'metadata' must be an object")
    declared = metadata.get("election_sha256")
    if verify_digest and declared is not None and declared != election.digest():
        raise SchemaError("assertion set was generated for a different election (digest mismatch)")
    try:
        return AssertionSet(method, winner, tuple(assertions), dict(metadata))
    except ValueError as exc:
        raise SchemaError(str(exc)) from None
