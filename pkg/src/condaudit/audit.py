"""Sequential risk measurement and audit simulation.

The risk function is the Kaplan-Kolmogorov martingale test for sampling
without replacement: the hypothesis that a population of ``N`` nonnegative
values has mean at most ``t`` (here 1/2) is tested by the running product of
``(x_i + g) / m_i``, where ``g`` is a small padding guarding against zero
values and ``m_i`` is the conditional mean of the padded population under
the null given the padded mass already drawn,

    m_i = (N * (t + g) - S_{i-1}) / (N - (i - 1)).

The p-value is ``min(1, 1 / max_i M_i)``; it is non-increasing in the sample
and the draws must arrive in random order.  Once the null becomes impossible
(``m <= 0``) the p-value is 0.

Audit sample sizes (ASN) are estimated by simulation: errors are scattered
over the ballot population at a configured rate, the population is drawn in
a uniformly random order, and the number of draws until the p-value falls
below the risk limit is recorded; the per-assertion ASN is the median over
trials, and a set's overall ASN is the largest per-assertion ASN.  Each
trial's random stream is derived from (seed, assertion index, trial index),
so results are reproducible regardless of execution order or parallelism.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ballots import ParseError
from .model import Ballot, Election
from .assertions import Assertion, AssertionSet, FullHandCount, assorter_mean, assorter_value

AUDIT_STYLES = ("polling", "comparison")

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class AuditConfig:
    """Parameters shared by estimation and audit execution."""

    risk_limit: float = 0.05
    error_rate: float = 0.002
    trials: int = 2000
    seed: int = 0
    style: str = "polling"
    padding: float = 0.1
    max_sample_fraction: float = 1.0

    def __post_init__(self):
        if not 0 < self.risk_limit < 1:
            raise ValueError("risk_limit must be in (0, 1)")
        if not 0 <= self.error_rate < 1:
            raise ValueError("error_rate must be in [0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.style not in AUDIT_STYLES:
            raise ValueError(f"style must be one of {AUDIT_STYLES}")
        if not 0 < self.padding <= 1:
            raise ValueError("padding must be in (0, 1]")
        if not 0 < self.max_sample_fraction <= 1:
            raise ValueError("max_sample_fraction must be in (0, 1]")


# ---------------------------------------------------------------------------
# Kaplan-Kolmogorov risk function


@dataclass(frozen=True)
class RiskState:
    """Running state of one assertion's sequential test.

    The martingale is tracked in log space so long audits neither overflow
    nor lose a vanished product to underflow; ``martingale`` and ``p_value``
    are derived views.
    """

    population: int
    null_mean: float = 0.5
    padding: float = 0.1
    padded_sum: float = 0.0
    log_martingale: float = 0.0
    peak_log_martingale: float = float("-inf")
    samples_seen: int = 0
    null_impossible: bool = False

    @property
    def martingale(self) -> float:
        if self.log_martingale > 700:
            return float("inf")
        return math.exp(self.log_martingale)

    @property
    def p_value(self) -> float:
        peak = self.peak_log_martingale
        if peak <= 0:
            return 1.0
        if peak == float("inf"):
            return 0.0
        return math.exp(-peak)


def kk_update(state: RiskState, x: float) -> RiskState:
    """Fold one sampled assorter value into the test; returns the new state."""
    if x < 0 or math.isnan(x):
        raise ValueError(f"assorter values must be nonnegative, got {x}")
    if state.samples_seen >= state.population:
        raise RuntimeError("population exhausted: no further draws are possible")
    y = x + state.padding
    if state.null_impossible:
        log_m = float("inf")
    else:
        m = (
            state.population * (state.null_mean + state.padding) - state.padded_sum
        ) / (state.population - state.samples_seen)
        if m <= 0:
            log_m = float("inf")
        else:
            step = (math.log(y) if y > 0 else float("-inf")) - math.log(m)
            log_m = state.log_martingale + step
    return replace(
        state,
        padded_sum=state.padded_sum + y,
        log_martingale=log_m,
        peak_log_martingale=max(state.peak_log_martingale, log_m),
        samples_seen=state.samples_seen + 1,
        null_impossible=state.null_impossible or log_m == float("inf"),
    )


def kk_pvalue_trace(
    x: np.ndarray, population: int, null_mean: float = 0.5, padding: float = 0.1
) -> np.ndarray:
    """Vectorized p-value trace for a sequence of draws (batch form of kk_update)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n > population:
        raise ValueError("more draws than the population holds")
    if n and x.min() < 0:
        raise ValueError("assorter values must be nonnegative")
    if n == 0:
        return np.empty(0, dtype=np.float64)
    y = x + padding
    prior = np.concatenate(([0.0], np.cumsum(y)[:-1]))
    m = (population * (null_mean + padding) - prior) / (population - np.arange(n))
    with np.errstate(divide="ignore", invalid="ignore"):
        steps = np.log(y) - np.log(m)
    log_mart = np.cumsum(steps)
    impossible = np.logical_or.accumulate(m <= 0)
    log_mart[impossible] = np.inf
    peak = np.maximum.accumulate(log_mart)
    with np.errstate(over="ignore"):
        p = np.where(peak <= 0, 1.0, np.exp(-np.clip(peak, 0.0, None)))
    return p


# ---------------------------------------------------------------------------
# Comparison (overstatement) assorter


def comparison_assorter_value(
    assertion: Assertion, reported_ballot: Ballot, audited_ballot: Ballot, reported_mean: float
) -> float:
    """Overstatement-based score for a (reported, audited) ballot pair.

    With polling assorter ``a`` (upper bound 1), overstatement
    ``w = a(reported) - a(audited)`` and reported margin
    ``v = 2 * reported_mean - 1``, the value is ``(1 - w) / (2 - v)``; its
    population mean exceeds 1/2 exactly when the assertion holds on the
    audited ballots.  Only reportedly-true assertions (mean > 1/2) admit
    this construction.
    """
    if not reported_mean > 0.5:
        raise ValueError("comparison audits require a reported assorter mean above 1/2")
    overstatement = assorter_value(assertion, reported_ballot) - assorter_value(
        assertion, audited_ballot
    )
    v = 2 * reported_mean - 1
    return (1 - overstatement) / (2 - v)


# ---------------------------------------------------------------------------
# ASN simulation


def _signature_table(election: Election) -> tuple[list[Ballot], np.ndarray]:
    """Distinct signatures in deterministic order, plus the expanded population."""
    sigs = sorted(election.profile)
    counts = np.array([election.profile[s] for s in sigs], dtype=np.int64)
    population = np.repeat(np.arange(len(sigs), dtype=np.int64), counts)
    return sigs, population


def _trial_stream(cfg: AuditConfig, assertion_index: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed & _SEED_MASK, assertion_index, trial])


def simulate_trials(
    assertion: Assertion,
    election: Election,
    cfg: AuditConfig,
    assertion_index: int = 0,
    workers: int = 1,
) -> np.ndarray:
    """Per-trial first sample size at which the audit certifies the assertion.

    Each trial perturbs the ballot population under the error model (every
    ballot is independently replaced, with probability ``error_rate``, by a
    uniformly random *other* signature from the election), draws the
    population in random order, and reports the first draw count with
    p-value at or below the risk limit; trials that never certify within
    ``max_sample_fraction * N`` draws report ``N + 1``.
    """
    if isinstance(assertion, FullHandCount):
        raise ValueError("a full-hand-count sentinel cannot be audited by sampling")
    sigs, population = _signature_table(election)
    n = population.size
    if n == 0:
        return np.zeros(cfg.trials, dtype=np.int64)
    values = np.array([assorter_value(assertion, sig) for sig in sigs], dtype=np.float64)
    cap = max(1, math.ceil(cfg.max_sample_fraction * n))

    reported_mean = 0.0
    if cfg.style == "comparison":
        reported_mean = float(values[population].mean())
        if not reported_mean > 0.5:
            # The reported tallies do not even support the assertion; no
            # comparison audit can be formed, so every trial is a full count.
            return np.full(cfg.trials, n + 1, dtype=np.int64)

    def one_trial(trial: int) -> int:
        rng = _trial_stream(cfg, assertion_index, trial)
        audited = population
        if cfg.error_rate > 0 and len(sigs) > 1:
            audited = population.copy()
            hit = np.flatnonzero(rng.random(n) < cfg.error_rate)
            if hit.size:
                draw = rng.integers(0, len(sigs) - 1, size=hit.size)
                draw += draw >= audited[hit]
                audited[hit] = draw
        order = rng.permutation(n)[:cap]
        if cfg.style == "polling":
            x = values[audited[order]]
        else:
            v = 2 * reported_mean - 1
            x = (1.0 - (values[population[order]] - values[audited[order]])) / (2 - v)
        p = kk_pvalue_trace(x, n, padding=cfg.padding)
        crossed = np.flatnonzero(p <= cfg.risk_limit)
        return int(crossed[0]) + 1 if crossed.size else n + 1

    results = np.empty(cfg.trials, dtype=np.int64)
    if workers <= 1:
        for trial in range(cfg.trials):
            results[trial] = one_trial(trial)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for trial, stop in zip(range(cfg.trials), pool.map(one_trial, range(cfg.trials))):
                results[trial] = stop
    return results


def simulate_asn(
    assertion: Assertion,
    election: Election,
    cfg: AuditConfig,
    assertion_index: int = 0,
    workers: int = 1,
) -> int:
    """Anticipated sample number: the median trial sample size.

    Trials that never certify count as a full count of ``N`` ballots.  A
    full-hand-count sentinel always costs the whole population.
    """
    n = election.total_ballots
    if isinstance(assertion, FullHandCount):
        return n
    stops = simulate_trials(assertion, election, cfg, assertion_index, workers)
    return int(math.ceil(float(np.median(np.minimum(stops, n)))))


@dataclass(frozen=True)
class ASNEstimate:
    """Estimated sample sizes for an assertion set."""

    per_assertion: tuple[int, ...]
    overall: int
    full_count_flag: bool
    population: int

    @property
    def percentage(self) -> float:
        return 100.0 * self.overall / self.population if self.population else 0.0


def estimate_audit(
    aset: AssertionSet, election: Election, cfg: AuditConfig, workers: int = 1
) -> ASNEstimate:
    """Estimate the sample size to audit a whole set: the max over its members."""
    n = election.total_ballots
    per: list[int] = []
    full = False
    for idx, assertion in enumerate(aset.assertions):
        if isinstance(assertion, FullHandCount):
            per.append(n)
            full = True
            continue
        asn = simulate_asn(assertion, election, cfg, assertion_index=idx, workers=workers)
        if cfg.style == "comparison" and not assorter_mean(assertion, election) > 0.5:
            full = True
        per.append(asn)
    overall = n if full else max(per, default=0)
    return ASNEstimate(tuple(per), overall, full, n)


# ---------------------------------------------------------------------------
# Batch audit execution


@dataclass(frozen=True)
class AuditSample:
    """One drawn ballot: the audited interpretation, plus the reported one
    when auditing against electronic records."""

    audited: Ballot
    reported: Ballot | None = None


def load_samples(source: str | Path | Iterable[str], election: Election) -> list[AuditSample]:
    """Read a JSON-lines sample file in draw order.

    Each line is ``{"audited": [names...]}`` or
    ``{"reported": [...], "audited": [...]}``.  Candidate names are resolved
    against the election roster; unknown names are data errors.
    """
    if isinstance(source, (str, Path)):
        lines = Path(source).read_text(encoding="utf-8").splitlines()
    else:
        lines = [ln.rstrip("\n") for ln in source]
    index = {name: i for i, name in enumerate(election.candidates)}

    def to_ballot(names, lineno: int) -> Ballot:
        if not isinstance(names, list):
            raise ParseError("ballot must be a list of candidate names", lineno)
        sig = []
        for name in names:
            if name not in index:
                raise ParseError(f"unknown candidate name {name!r}", lineno)
            sig.append(index[name])
        if len(set(sig)) != len(sig):
            raise ParseError("duplicate candidate within one ranking", lineno)
        return tuple(sig)

    samples: list[AuditSample] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
        if not isinstance(doc, dict) or "audited" not in doc:
            raise ParseError("each sample needs an 'audited' ballot", lineno)
        audited = to_ballot(doc["audited"], lineno)
        reported = to_ballot(doc["reported"], lineno) if "reported" in doc else None
        samples.append(AuditSample(audited, reported))
    return samples


@dataclass(frozen=True)
class AssertionAuditRecord:
    assertion: Assertion
    certified: bool
    p_value: float
    p_trace: tuple[float, ...]


@dataclass(frozen=True)
class AuditReport:
    """Outcome of running an audit over a drawn sample."""

    outcome: str  # "certified" | "escalate-full-count"
    ballots_examined: int
    risk_limit: float
    records: tuple[AssertionAuditRecord, ...]

    @property
    def certified(self) -> bool:
        return self.outcome == "certified"


def run_audit(
    aset: AssertionSet,
    samples: Sequence[AuditSample],
    election: Election,
    cfg: AuditConfig,
) -> AuditReport:
    """Feed a drawn sample through every assertion's sequential test.

    Samples must be supplied in their (externally randomized) draw order.
    The audit certifies once every assertion's p-value is at or below the
    risk limit, and stops consuming samples at that point; exhausting the
    sample first escalates to a full hand count.
    """
    if aset.full_hand_count:
        sentinel = aset.assertions[0]
        record = AssertionAuditRecord(sentinel, False, 1.0, ())
        return AuditReport("escalate-full-count", 0, cfg.risk_limit, (record,))
    if not aset.assertions:
        return AuditReport("certified", 0, cfg.risk_limit, ())

    n = election.total_ballots
    if len(samples) > n:
        raise ValueError(f"sample of {len(samples)} exceeds the population of {n} ballots")

    reported_means: list[float] = []
    if cfg.style == "comparison":
        for assertion in aset.assertions:
            mean = assorter_mean(assertion, election)
            if not mean > 0.5:
                raise ValueError(
                    "comparison audit is impossible: reported tallies do not support "
                    "the assertion (mean <= 1/2)"
                )
            reported_means.append(mean)

    states = [RiskState(n, padding=cfg.padding) for _ in aset.assertions]
    traces: list[list[float]] = [[] for _ in aset.assertions]
    examined = 0
    for sample in samples:
        if all(s.p_value <= cfg.risk_limit for s in states):
            break
        examined += 1
        for idx, assertion in enumerate(aset.assertions):
            if cfg.style == "polling":
                x = assorter_value(assertion, sample.audited)
            else:
                if sample.reported is None:
                    raise ValueError("comparison audits need a reported ballot per sample")
                x = comparison_assorter_value(
                    assertion, sample.reported, sample.audited, reported_means[idx]
                )
            states[idx] = kk_update(states[idx], x)
            traces[idx].append(states[idx].p_value)

    certified_all = all(s.p_value <= cfg.risk_limit for s in states)
    records = tuple(
        AssertionAuditRecord(
            assertion,
            states[idx].p_value <= cfg.risk_limit,
            states[idx].p_value,
            tuple(traces[idx]),
        )
        for idx, assertion in enumerate(aset.assertions)
    )
    outcome = "certified" if certified_all else "escalate-full-count"
    return AuditReport(outcome, examined, cfg.risk_limit, records)
