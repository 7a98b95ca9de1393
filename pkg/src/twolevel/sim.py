"""Monte Carlo estimates of the group-level (e1) and user-level (e2) tracing errors.

Each trial draws a fresh code realization (the secret key), lets the
coalition forge with a chosen strategy, decodes, and records whether the
decoder missed the coalition (e2) or all of the coalition's groups (e1).

Two engines produce statistically identical outcomes:

``explicit``
    materializes the whole code and runs the minimum-distance decoder.
``implicit``
    draws only the pirates' codewords and samples the distance of the closest
    innocent user from its exact distribution.  This is what makes codes with
    ``q ** (n R)`` users tractable.  It counts a tie between an innocent and
    the closest pirate as an error (adversarial ties).
"""
from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import gammaln
from scipy.stats import binomtest

from .attacks import get_strategy
from .construct import ConstructionParams, build_random_two_level, center_for, offset_for, users_for_rate
from .core import UsageError, UserId
from .decode import TieBreak, distances_to
from .rng import derive_seed, stream

ADVERSARIAL = "adversarial"
TIE_POLICIES = (TieBreak.LEX_FIRST.value, TieBreak.STRICT_FAIL.value, ADVERSARIAL)
ENGINES = ("auto", "explicit", "implicit")
EXPLICIT_MAX_USERS = 4096
EVENT_CLASSES = ("same_group", "other_group", "tie_failure")


def coalition_pattern(size: int, layout: str) -> tuple[UserId, ...]:
    """``distinct``: users (1,1), (2,1), ...; ``same``: users (1,1), (1,2), ..."""
    if size < 1:
        raise UsageError("coalition size must be at least 1")
    if layout == "distinct":
        return tuple(UserId(g, 1) for g in range(1, size + 1))
    if layout == "same":
        return tuple(UserId(1, m) for m in range(1, size + 1))
    raise UsageError(f"layout must be 'distinct' or 'same', got {layout!r}")


@dataclass(frozen=True)
class TrialSpec:
    construction: ConstructionParams
    coalition: tuple[UserId, ...]
    strategy: str = "interleave-uniform"
    tiebreak: str = ADVERSARIAL
    trials: int = 1000
    engine: str = "auto"

    def __post_init__(self):
        c = self.construction
        coal = tuple(UserId(*u) for u in self.coalition)
        object.__setattr__(self, "coalition", coal)
        if not coal:
            raise UsageError("coalition must not be empty")
        if len(set(coal)) != len(coal):
            raise UsageError("coalition lists a user twice")
        for u in coal:
            if not (1 <= u.group <= c.M1 and 1 <= u.member <= c.M2):
                raise UsageError(f"coalition member {u} outside [{c.M1}] x [{c.M2}]")
        if self.trials < 1:
            raise UsageError("trials must be at least 1")
        if self.tiebreak not in TIE_POLICIES:
            raise UsageError(f"tiebreak must be one of {TIE_POLICIES}")
        if self.engine not in ENGINES:
            raise UsageError(f"engine must be one of {ENGINES}")
        strat = get_strategy(self.strategy)
        if self.resolved_engine == "implicit":
            if self.tiebreak != ADVERSARIAL:
                raise UsageError("the implicit engine only supports adversarial tie accounting")
            if strat.needs_code:
                raise UsageError(f"strategy {self.strategy!r} needs the full code; use the explicit engine")

    @property
    def seed(self) -> int:
        return self.construction.seed

    @property
    def resolved_engine(self) -> str:
        if self.engine != "auto":
            return self.engine
        c = self.construction
        return "explicit" if c.M1 * c.M2 <= EXPLICIT_MAX_USERS else "implicit"


@dataclass(frozen=True)
class TrialOutcome:
    e1: bool
    e2: bool
    event: str | None  # one of EVENT_CLASSES when e2
    pirate_distance: int
    innocent_distance: int  # closest innocent; n + 1 if there is none
    tie_count: int
    # implicit engine only: error probabilities conditional on the pirate side of the trial
    p_e1: float | None = None
    p_e2: float | None = None


def _check_inclusion(out: TrialOutcome) -> TrialOutcome:
    if out.e1 and not out.e2:
        raise RuntimeError(f"group error without user error: {out}")
    return out


# -- explicit engine ---------------------------------------------------------


def _explicit_trial(spec: TrialSpec, index: int) -> TrialOutcome:
    c = spec.construction
    key = derive_seed(spec.seed, "trial", index)
    code = build_random_two_level(replace(c, seed=key))
    fps = code.fingerprints(spec.coalition)
    y = get_strategy(spec.strategy)(fps, stream(spec.seed, "forge", index), code=code, coalition=spec.coalition)
    dist = distances_to(code, y)
    dmin = int(dist.min())
    closest = [UserId(int(g) + 1, int(m) + 1) for g, m in zip(*np.nonzero(dist == dmin))]
    pirates = set(spec.coalition)
    pirate_groups = {u.group for u in pirates}
    innocent_mask = np.ones(dist.shape, dtype=bool)
    for u in pirates:
        innocent_mask[u.group - 1, u.member - 1] = False
    innocent_d = int(dist[innocent_mask].min()) if innocent_mask.any() else c.n + 1
    pirate_d = min(int(dist[u.group - 1, u.member - 1]) for u in pirates)

    if spec.tiebreak == ADVERSARIAL:
        e2 = any(u not in pirates for u in closest)
        e1 = any(u.group not in pirate_groups for u in closest)
        event = None
        if e1:
            event = "other_group"
        elif e2:
            event = "same_group"
    else:
        if spec.tiebreak == TieBreak.STRICT_FAIL.value and len(closest) > 1:
            return _check_inclusion(TrialOutcome(True, True, "tie_failure", pirate_d, innocent_d, len(closest)))
        u = closest[0]
        e2 = u not in pirates
        e1 = u.group not in pirate_groups
        event = ("other_group" if e1 else "same_group") if e2 else None
    return _check_inclusion(TrialOutcome(e1, e2, event, pirate_d, innocent_d, len(closest)))


# -- implicit engine ---------------------------------------------------------


def _log_comb(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


@lru_cache(maxsize=16)
def offset_distance_logcdf(n: int, w: int, q: int) -> np.ndarray:
    """``log P[dist(S, z) <= d]`` for ``S`` uniform of weight ``w``; row ``k = wt(z)``, column ``d``.

    With ``a`` nonzeros of ``S`` off the support of ``z``, ``b`` positions
    where ``S`` equals ``z`` and ``c`` where both are nonzero but differ,
    ``dist = a + k - b`` and the number of such ``S`` is
    ``C(n-k, a)(q-1)^a C(k, b) C(k-b, c)(q-2)^c``.
    """
    a = np.arange(w + 1)[:, None]
    b = np.arange(w + 1)[None, :]
    c = w - a - b
    lq1 = math.log(q - 1)
    lq2 = math.log(q - 2) if q > 2 else -math.inf
    total = float(_log_comb(n, w)) + w * lq1
    out = np.full((n + 1, n + 1), -np.inf)
    for k in range(n + 1):
        ok = (c >= 0) & (a <= n - k) & (b + c <= k)
        if q == 2:
            ok &= c == 0
        if not ok.any():
            continue
        with np.errstate(invalid="ignore"):
            lc = (
                _log_comb(n - k, a) + a * lq1 + _log_comb(k, b) + _log_comb(k - b, c)
                + np.where(c > 0, c * lq2, 0.0)
            )
        lc = lc[ok]
        d = np.broadcast_to(a + k - b, ok.shape)[ok]
        top = lc.max()
        pmf = np.bincount(d, weights=np.exp(lc - top), minlength=n + 1)
        with np.errstate(divide="ignore"):
            out[k] = np.log(np.cumsum(pmf)) + top - total
    return np.minimum(out, 0.0)


def _min_of_many_cdf(logcdf: np.ndarray, log_m: float) -> np.ndarray:
    """``P[min of m i.i.d. draws <= d]`` from the single-draw ``log P[X <= d]``."""
    F = np.exp(logcdf)
    with np.errstate(divide="ignore"):
        log_x = np.where(F > 1e-12, np.log(-np.log1p(-np.minimum(F, 1.0))), logcdf)  # log(-log(1-F))
        return -np.expm1(-np.exp(np.minimum(log_x + log_m, 700.0)))


@lru_cache(maxsize=16)
def _other_group_cdf(n: int, w: int, q: int, log_m1: float, log_m2: float) -> np.ndarray:
    """CDF of the closest innocent among ``m1`` groups of ``m2`` users that share no pirate."""
    table = offset_distance_logcdf(n, w, q)
    k = np.arange(n + 1)
    log_pk = _log_comb(n, k) + k * math.log(q - 1) - n * math.log(q)  # wt(y - R) ~ Bin(n, (q-1)/q)
    group = _min_of_many_cdf(table, log_m2)  # (k, d)
    G = np.clip((np.exp(log_pk)[:, None] * group).sum(axis=0), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        return _min_of_many_cdf(np.log(G), log_m1)


def _sample_cdf(cdf: np.ndarray, u: float) -> int:
    return int(np.searchsorted(cdf, u, side="left"))


def _implicit_trial(spec: TrialSpec, index: int) -> TrialOutcome:
    c = spec.construction
    n, q, w = c.n, c.q, c.w
    key = derive_seed(spec.seed, "trial", index)
    pirates = spec.coalition
    groups = sorted({u.group for u in pirates})
    centers = {g: center_for(key, g, n, q) for g in groups}
    fps = np.stack([(centers[u.group].astype(np.int64) + offset_for(key, u, n, w, q)) % q for u in pirates]).astype(np.uint8)
    y = get_strategy(spec.strategy)(fps, stream(spec.seed, "forge", index))
    pirate_d = int(np.count_nonzero(fps != y, axis=1).min())

    rng = stream(spec.seed, "innocent", index)
    table = offset_distance_logcdf(n, w, q)
    same_d = n + 1
    same_clear = 1.0  # P[no innocent in a pirate group is within pirate_d]
    for g in groups:
        m = c.M2 - sum(1 for u in pirates if u.group == g)
        if m > 0:
            k = int(np.count_nonzero((y.astype(np.int64) - centers[g]) % q))
            cdf = _min_of_many_cdf(table[k], math.log(m))
            same_d = min(same_d, _sample_cdf(cdf, rng.random()))
            same_clear *= 1.0 - cdf[pirate_d]
    m1 = c.M1 - len(groups)
    other_d = n + 1
    p_e1 = 0.0
    other_clear = 1.0
    if m1 > 0:
        cdf = _other_group_cdf(n, w, q, math.log(m1), math.log(c.M2))
        other_d = _sample_cdf(cdf, rng.random())
        p_e1 = float(cdf[min(pirate_d, same_d)])
        other_clear = 1.0 - cdf[pirate_d]

    innocent_d = min(same_d, other_d)
    e2 = innocent_d <= pirate_d
    e1 = other_d <= min(pirate_d, same_d)
    event = ("other_group" if e1 else "same_group") if e2 else None
    ties = int(innocent_d == pirate_d)
    p_e2 = float(1.0 - same_clear * other_clear)
    return _check_inclusion(TrialOutcome(e1, e2, event, pirate_d, innocent_d, 1 + ties, p_e1, p_e2))


def run_trial(spec: TrialSpec, trial_index: int) -> TrialOutcome:
    """One key draw, one forgery, one decode; fully determined by ``(seed, trial_index)``."""
    if spec.resolved_engine == "explicit":
        return _explicit_trial(spec, trial_index)
    return _implicit_trial(spec, trial_index)


# -- aggregation -------------------------------------------------------------


@dataclass(frozen=True)
class ErrorEstimate:
    """Event counts over ``trials``.

    ``p_e1``/``p_e2`` (implicit engine only) average the per-trial error
    probabilities conditional on the pirates' side of each trial; they have
    the same expectation as ``e1_hat``/``e2_hat`` but resolve far smaller
    values.
    """

    trials: int
    e1_count: int
    e2_count: int
    events: dict = field(default_factory=dict)
    p_e1: float | None = None
    p_e2: float | None = None

    @property
    def e1_hat(self) -> float:
        return self.e1_count / self.trials

    @property
    def e2_hat(self) -> float:
        return self.e2_count / self.trials

    @staticmethod
    def _ci(k, n):
        ci = binomtest(k, n).proportion_ci(confidence_level=0.95, method="wilson")
        return (float(ci.low), float(ci.high))

    @property
    def e1_ci(self) -> tuple[float, float]:
        return self._ci(self.e1_count, self.trials)

    @property
    def e2_ci(self) -> tuple[float, float]:
        return self._ci(self.e2_count, self.trials)

    @property
    def tie_failure_fraction(self) -> float:
        return self.events.get("tie_failure", 0) / self.trials

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "e1_hat": self.e1_hat,
            "e1_ci95": list(self.e1_ci),
            "e2_hat": self.e2_hat,
            "e2_ci95": list(self.e2_ci),
            "events": {k: self.events.get(k, 0) for k in EVENT_CLASSES},
            "resolution": 1 / self.trials,
            "below_resolution": {"e1": self.e1_count == 0, "e2": self.e2_count == 0},
            "p_e1": self.p_e1,
            "p_e2": self.p_e2,
        }


def _count(spec: TrialSpec, indices):
    e1 = e2 = 0
    events = dict.fromkeys(EVENT_CLASSES, 0)
    probs = []
    for i in indices:
        out = run_trial(spec, int(i))
        e1 += out.e1
        e2 += out.e2
        if out.event:
            events[out.event] += 1
        probs.append((out.p_e1, out.p_e2))
    return e1, e2, events, probs


def _count_job(args):
    return _count(*args)


def estimate_errors(spec: TrialSpec, workers: int = 1) -> ErrorEstimate:
    """Monte Carlo mean of the error events; identical for every ``workers`` value."""
    idx = np.arange(spec.trials)
    if workers <= 1:
        parts = [_count(spec, idx)]
    else:
        chunks = [ch for ch in np.array_split(idx, workers * 4) if len(ch)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_count_job, [(spec, ch) for ch in chunks]))
    events = dict.fromkeys(EVENT_CLASSES, 0)
    for part in parts:
        for k, v in part[2].items():
            events[k] += v
    probs = [p for part in parts for p in part[3]]  # trial order, whatever the chunking
    p_e1 = p_e2 = None
    if probs and probs[0][0] is not None:
        p_e1 = math.fsum(p[0] for p in probs) / spec.trials
        p_e2 = math.fsum(p[1] for p in probs) / spec.trials
    return ErrorEstimate(
        trials=spec.trials,
        e1_count=sum(p[0] for p in parts),
        e2_count=sum(p[1] for p in parts),
        events=events,
        p_e1=p_e1,
        p_e2=p_e2,
    )


@dataclass(frozen=True)
class SweepTemplate:
    """Fixed rates and attack; the block length varies."""

    q: int
    R1: float
    R2: float
    omega: float
    seed: int
    coalition_size: int = 2
    layout: str = "distinct"
    strategy: str = "interleave-uniform"
    tiebreak: str = ADVERSARIAL
    trials: int = 1000
    engine: str = "auto"

    def spec_for(self, n: int) -> TrialSpec:
        params = ConstructionParams(
            q=self.q,
            n=n,
            M1=users_for_rate(self.q, n, self.R1),
            M2=users_for_rate(self.q, n, self.R2),
            omega=self.omega,
            seed=derive_seed(self.seed, "blocklength", n),
        )
        return TrialSpec(
            construction=params,
            coalition=coalition_pattern(self.coalition_size, self.layout),
            strategy=self.strategy,
            tiebreak=self.tiebreak,
            trials=self.trials,
            engine=self.engine,
        )


SWEEP_COLUMNS = ("n", "w", "M1", "M2", "engine", "trials", "e1_hat", "e1_lo", "e1_hi", "e2_hat", "e2_lo", "e2_hi",
                 "same_group", "other_group", "tie_failure", "p_e1", "p_e2")


def sweep_blocklength(template: SweepTemplate, n_list: Sequence[int], workers: int = 1) -> tuple[str, list[ErrorEstimate]]:
    """CSV (with a ``#`` parameter line) of error estimates per block length."""
    specs = [template.spec_for(int(n)) for n in n_list]  # validates every n before any work
    buf = io.StringIO()
    t = template
    buf.write(
        f"# q={t.q} R1={t.R1!r} R2={t.R2!r} omega={t.omega!r} seed={t.seed} coalition={t.coalition_size}-{t.layout} "
        f"strategy={t.strategy} tiebreak={t.tiebreak}\n"
    )
    buf.write(",".join(SWEEP_COLUMNS) + "\n")
    results = []
    for spec in specs:
        est = estimate_errors(spec, workers=workers)
        results.append(est)
        c = spec.construction
        lo1, hi1 = est.e1_ci
        lo2, hi2 = est.e2_ci
        row = [c.n, c.w, c.M1, c.M2, spec.resolved_engine, est.trials, repr(est.e1_hat), repr(lo1), repr(hi1),
               repr(est.e2_hat), repr(lo2), repr(hi2), *(est.events[k] for k in EVENT_CLASSES),
               "" if est.p_e1 is None else repr(est.p_e1), "" if est.p_e2 is None else repr(est.p_e2)]
        buf.write(",".join(str(v) for v in row) + "\n")
    return buf.getvalue(), results
