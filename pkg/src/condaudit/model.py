"""Core data model for ranked-ballot elections.

Candidates are dense integer indices ``0..k-1``; display names live on the
election roster and are only used at I/O boundaries.  A ballot is a tuple of
distinct candidate indices, most preferred first; it may rank any subset of
the candidates, including none.  An election stores its ballots as a multiset
keyed by signature (the exact ranking tuple).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

Ballot = tuple[int, ...]


@dataclass(frozen=True)
class Election:
    """A candidate roster plus a multiset of ballot signatures.

    ``candidates[i]`` is the name of candidate ``i``.  ``profile`` maps each
    distinct ballot signature to the (nonnegative) number of ballots cast
    with that exact ranking.  Instances are validated on construction and
    must be treated as immutable.
    """

    candidates: tuple[str, ...]
    profile: dict[Ballot, int] = field(default_factory=dict)

    def __post_init__(self):
        names = tuple(self.candidates)
        object.__setattr__(self, "candidates", names)
        if len(set(names)) != len(names):
            raise ValueError("candidate names must be unique")
        k = len(names)
        prof: dict[Ballot, int] = {}
        for sig, count in self.profile.items():
            sig = tuple(sig)
            if not isinstance(count, int) or count < 0:
                raise ValueError(f"ballot count for {sig} must be a nonnegative integer")
            if len(set(sig)) != len(sig):
                raise ValueError(f"duplicate candidate in ballot {sig}")
            for c in sig:
                if not 0 <= c < k:
                    raise ValueError(f"ballot {sig} references unknown candidate index {c}")
            prof[sig] = prof.get(sig, 0) + count
        object.__setattr__(self, "profile", prof)

    @property
    def num_candidates(self) -> int:
        return len(self.candidates)

    @property
    def total_ballots(self) -> int:
        return sum(self.profile.values())

    def name_of(self, index: int) -> str:
        return self.candidates[index]

    def index_of(self, name: str) -> int:
        try:
            return self.candidates.index(name)
        except ValueError:
            raise KeyError(f"unknown candidate name {name!r}") from None

    def digest(self) -> str:
        """SHA-256 of a canonical serialization, for tying artifacts to inputs."""
        doc = {
            "candidates": list(self.candidates),
            "profile": sorted([list(sig), n] for sig, n in self.profile.items()),
        }
        blob = json.dumps(doc, separators=(",", ":"), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def prefers(ballot: Ballot, i: int, j: int) -> bool:
    """True iff the ballot prefers candidate ``i`` over candidate ``j``.

    A ballot prefers i over j when i appears before j on it, or when i
    appears and j does not.  A ballot mentioning neither, or only j,
    expresses no preference for i.
    """
    if i == j:
        raise ValueError("prefers() requires two distinct candidates")
    for c in ballot:
        if c == i:
            return True
        if c == j:
            return False
    return False


def pairwise_tallies(election: Election) -> np.ndarray:
    """k x k matrix whose (i, j) entry counts ballots preferring i over j.

    Ballots ranking only one of the pair count for the ranked candidate;
    ballots ranking neither count for neither, so opposing entries may sum
    to less than the total number of ballots.  The diagonal is zero.
    """
    k = election.num_candidates
    tallies = np.zeros((k, k), dtype=np.int64)
    for sig, count in election.profile.items():
        ranked = list(sig)
        unranked = [c for c in range(k) if c not in sig]
        for p, i in enumerate(ranked):
            for j in ranked[p + 1:]:
                tallies[i, j] += count
            for j in unranked:
                tallies[i, j] += count
    return tallies


def scores(tallies: np.ndarray) -> np.ndarray:
    """Pairwise margin matrix: entry (i, j) is tallies[i, j] - tallies[j, i]."""
    tallies = np.asarray(tallies)
    return tallies - tallies.T


def restrict_to(election: Election, keep: Iterable[int]) -> Election:
    """Project an election onto a candidate subset.

    Kept candidates are renumbered densely in ascending original order;
    rankings are filtered to kept candidates, preserving order, and
    identical filtered signatures are merged.
    """
    kept = sorted(set(keep))
    for c in kept:
        if not 0 <= c < election.num_candidates:
            raise ValueError(f"unknown candidate index {c}")
    remap = {old: new for new, old in enumerate(kept)}
    names = tuple(election.candidates[c] for c in kept)
    profile: dict[Ballot, int] = {}
    for sig, count in election.profile.items():
        reduced = tuple(remap[c] for c in sig if c in remap)
        profile[reduced] = profile.get(reduced, 0) + count
    return Election(names, profile)
