"""Traceability certification.

``check_prop1`` tests the sufficient distance conditions; ``verify_ta_exhaustive``
is the ground truth: it walks every coalition of size at most ``t1`` and every
forgery in its envelope, and demands that *every* closest user is acceptable
(a pirate for coalitions of size <= ``t2``, a pirate's group for size <= ``t1``).
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .construct import min_distances
from .core import OneLevelCode, TwoLevelCode, UsageError, UserId
from .decode import minimizers
from .envelope import envelope_array, envelope_contains, envelope_size

DEFAULT_WORK_LIMIT = 10**8
_ROW_CHUNK = 1 << 14


class WorkLimitExceeded(UsageError):
    def __init__(self, estimate: int, limit: int):
        super().__init__(f"exhaustive check needs {estimate} (coalition, forgery) pairs, limit is {limit}")
        self.estimate = estimate
        self.limit = limit


def check_prop1(code: TwoLevelCode, t1: int, t2: int) -> bool:
    """``d1 > n(1 - 1/t1^2)`` and ``d2 > n(1 - 1/t2^2)``, in exact integer arithmetic."""
    if not t1 > t2 >= 1:
        raise UsageError(f"need t1 > t2 >= 1, got t1={t1}, t2={t2}")
    if code.num_users < 2:
        return True
    prof = min_distances(code)
    n = code.n
    return prof.d1 * t1 * t1 > n * (t1 * t1 - 1) and prof.d2 * t2 * t2 > n * (t2 * t2 - 1)


@dataclass(frozen=True)
class Counterexample:
    coalition: tuple[UserId, ...]
    y: tuple[int, ...]
    part: str  # "a" (user level) or "b" (group level)
    decoded: tuple[UserId, ...]  # every closest user
    distance: int

    def to_dict(self) -> dict:
        return {
            "coalition": [list(u) for u in self.coalition],
            "y": list(self.y),
            "part": self.part,
            "decoded": [list(u) for u in self.decoded],
            "distance": self.distance,
        }


@dataclass(frozen=True)
class TAVerdict:
    holds: bool
    t1: int
    t2: int
    coalitions: int
    forgeries: int
    counterexample: Counterexample | None = field(default=None)

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "t1": self.t1,
            "t2": self.t2,
            "work": {"coalitions": self.coalitions, "forgeries": self.forgeries},
            "counterexample": None if self.counterexample is None else self.counterexample.to_dict(),
        }

    def recheck(self, code: TwoLevelCode) -> bool:
        """Independently confirm the counterexample (no-op ``True`` when the property holds)."""
        cx = self.counterexample
        if cx is None:
            return self.holds
        fps = code.fingerprints(cx.coalition)
        if not envelope_contains(fps, cx.y):
            return False
        dmin, closest = minimizers(code, np.array(cx.y))
        if dmin != cx.distance or tuple(closest) != cx.decoded:
            return False
        if cx.part == "a":
            return len(cx.coalition) <= self.t2 and any(u not in cx.coalition for u in closest)
        groups = {u.group for u in cx.coalition}
        return len(cx.coalition) <= self.t1 and any(u.group not in groups for u in closest)


def _coalitions(num_users: int, t: int):
    for size in range(1, min(t, num_users) + 1):
        yield from itertools.combinations(range(num_users), size)


def _scan(flat, M2, coalitions, t2):
    """First violation inside ``coalitions`` as ``(coalition_pos, row, part, y, dmin, mask)``."""
    groups = np.arange(len(flat)) // M2
    for pos, coal in coalitions:
        idx = np.array(coal)
        Y = envelope_array(flat[idx], limit=math.inf)
        bad_pirate = np.ones(len(flat), dtype=bool)
        bad_pirate[idx] = False
        bad_group = ~np.isin(groups, groups[idx])
        for lo in range(0, len(Y), _ROW_CHUNK):
            block = Y[lo : lo + _ROW_CHUNK]
            D = np.count_nonzero(block[:, None, :] != flat[None, :, :], axis=2)
            closest = D == D.min(axis=1, keepdims=True)
            viol_b = (closest & bad_group).any(axis=1)
            viol_a = (closest & bad_pirate).any(axis=1) if len(coal) <= t2 else np.zeros(len(block), bool)
            viol = viol_a | viol_b
            if viol.any():
                r = int(np.argmax(viol))
                part = "a" if viol_a[r] else "b"
                return pos, lo + r, part, block[r].tolist(), int(D[r].min()), np.flatnonzero(closest[r]).tolist()
    return None


def _scan_worker(args):
    return _scan(*args)


def verify_ta_exhaustive(
    code: TwoLevelCode,
    t1: int,
    t2: int,
    work_limit: int = DEFAULT_WORK_LIMIT,
    workers: int = 1,
) -> TAVerdict:
    """Exhaustive (t1, t2)-traceability check with adversarial tie semantics.

    ``t2 = 0`` leaves only the group-level condition, which is how one-level
    codes are checked (each user its own group).  The reported counterexample
    is the first one in canonical order (coalition size, then lexicographic
    coalition, then lexicographic forgery), whatever ``workers`` is.
    """
    if not t1 > t2 >= 0:
        raise UsageError(f"need t1 > t2 >= 0, got t1={t1}, t2={t2}")
    flat = code.flat()
    N = len(flat)
    n_coal = sum(math.comb(N, s) for s in range(1, min(t1, N) + 1))
    if n_coal > work_limit:
        raise WorkLimitExceeded(n_coal, work_limit)
    coalitions = list(_coalitions(N, t1))
    sizes = [envelope_size(flat[list(c)]) for c in coalitions]
    total = sum(sizes)
    if total > work_limit:
        raise WorkLimitExceeded(total, work_limit)

    indexed = list(enumerate(coalitions))
    if workers <= 1 or len(indexed) < 2:
        hit = _scan(flat, code.M2, indexed, t2)
    else:
        chunks = np.array_split(np.arange(len(indexed)), min(workers * 4, len(indexed)))
        jobs = [(flat, code.M2, [indexed[i] for i in ch], t2) for ch in chunks if len(ch)]
        hit = None
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_scan_worker, job) for job in jobs]
            for k, fut in enumerate(futures):
                res = fut.result()
                if res is not None:
                    hit = res
                    for later in futures[k + 1 :]:
                        later.cancel()
                    break

    def users(ids):
        return tuple(UserId(i // code.M2 + 1, i % code.M2 + 1) for i in ids)

    if hit is None:
        return TAVerdict(True, t1, t2, coalitions=len(coalitions), forgeries=total)
    pos, row, part, y, dmin, closest = hit
    cx = Counterexample(
        coalition=users(coalitions[pos]),
        y=tuple(y),
        part=part,
        decoded=users(closest),
        distance=dmin,
    )
    return TAVerdict(False, t1, t2, coalitions=pos + 1, forgeries=sum(sizes[:pos]) + row + 1, counterexample=cx)


# -- one-level / two-level transformations ---------------------------------


def one_per_group_subcode(code: TwoLevelCode, member_selector: int | Sequence[int] | Callable[[int], int] = 1) -> OneLevelCode:
    """Keep one member from every group.

    ``member_selector`` is a fixed 1-based member index, one index per group,
    or a function from group to member.
    """
    if callable(member_selector):
        picks = [member_selector(g) for g in range(1, code.M1 + 1)]
    elif np.ndim(member_selector) == 0:
        picks = [int(member_selector)] * code.M1
    else:
        picks = [int(m) for m in member_selector]
    if len(picks) != code.M1:
        raise UsageError(f"selector must name one member for each of the {code.M1} groups")
    rows = [code.codeword((g, m)) for g, m in zip(range(1, code.M1 + 1), picks)]
    return OneLevelCode(q=code.q, codewords=np.stack(rows))


def regroup_one_level(code_flat: OneLevelCode, M1: int, M2: int) -> TwoLevelCode:
    """View an ``M1*M2``-user one-level code as ``M1`` groups of ``M2``, row-major."""
    if code_flat.M != M1 * M2:
        raise UsageError(f"code has {code_flat.M} users, cannot split into {M1} x {M2}")
    return TwoLevelCode(q=code_flat.q, codewords=code_flat.codewords.reshape(M1, M2, code_flat.n))


def as_two_level(code: OneLevelCode) -> TwoLevelCode:
    """Each user in a group of its own."""
    return regroup_one_level(code, code.M, 1)


def verify_ta_one_level(code: OneLevelCode, t: int, **kwargs) -> TAVerdict:
    """Exhaustive t-traceability check for a one-level code."""
    return verify_ta_exhaustive(as_two_level(code), t, 0, **kwargs)
