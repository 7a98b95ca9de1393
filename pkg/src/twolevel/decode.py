"""Minimum-distance tracing: ``D2`` picks the closest user, ``D1`` its group."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import TwoLevelCode, UsageError, UserId


class TieBreak(str, enum.Enum):
    """What the decoder does when several users share the minimum distance."""

    LEX_FIRST = "lex-first"
    STRICT_FAIL = "strict-fail"


@dataclass(frozen=True)
class DecodeResult:
    user: UserId | None  # None is the failure output 0
    distance: int
    tie_count: int

    @property
    def group(self) -> int:
        return 0 if self.user is None else self.user.group

    @property
    def failed(self) -> bool:
        return self.user is None

    def to_dict(self) -> dict:
        return {
            "user": 0 if self.user is None else [self.user.group, self.user.member],
            "group": self.group,
            "distance": self.distance,
            "tie_count": self.tie_count,
        }


def distances_to(code: TwoLevelCode, y) -> np.ndarray:
    """Distance from ``y`` to every codeword, shape ``(M1, M2)``."""
    y = np.asarray(y)
    if y.shape != (code.n,):
        raise UsageError(f"forgery must have length {code.n}, got shape {y.shape}")
    if y.size and (y.min() < 0 or y.max() >= code.q):
        raise UsageError(f"forgery symbols must lie in [0, {code.q})")
    return np.count_nonzero(code.codewords != y.astype(np.uint8), axis=2)


def minimizers(code: TwoLevelCode, y) -> tuple[int, list[UserId]]:
    """Minimum distance and every user attaining it, in (group, member) order."""
    dist = distances_to(code, y)
    dmin = int(dist.min())
    gs, ms = np.nonzero(dist == dmin)
    return dmin, [UserId(int(g) + 1, int(m) + 1) for g, m in zip(gs, ms)]


def md_decode(code: TwoLevelCode, y, tiebreak: TieBreak = TieBreak.LEX_FIRST) -> DecodeResult:
    tiebreak = TieBreak(tiebreak)
    dist = distances_to(code, y).ravel()
    dmin = int(dist.min())
    hits = np.flatnonzero(dist == dmin)
    if len(hits) > 1 and tiebreak is TieBreak.STRICT_FAIL:
        return DecodeResult(user=None, distance=dmin, tie_count=len(hits))
    g, m = divmod(int(hits[0]), code.M2)
    return DecodeResult(user=UserId(g + 1, m + 1), distance=dmin, tie_count=len(hits))


def md_decode_group(code: TwoLevelCode, y, tiebreak: TieBreak = TieBreak.LEX_FIRST) -> int:
    return md_decode(code, y, tiebreak).group
