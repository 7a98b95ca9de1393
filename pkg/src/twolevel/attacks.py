"""Admissible coalition strategies.

A strategy maps the pirates' fingerprints (and optionally the public code)
to a forgery inside their envelope.  New strategies plug in through
:func:`register`; the shipped ones are stress tests, not a proven worst case.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import TwoLevelCode, UsageError, UserId
from .envelope import _rows


@dataclass(frozen=True)
class Strategy:
    name: str
    forge: Callable[..., np.ndarray]
    needs_code: bool = False

    def __call__(self, fps, rng, code: TwoLevelCode | None = None, coalition=None) -> np.ndarray:
        if self.needs_code:
            return self.forge(fps, rng, code=code, coalition=coalition)
        return self.forge(fps, rng)


STRATEGIES: dict[str, Strategy] = {}


def register(name: str, needs_code: bool = False):
    def deco(fn):
        STRATEGIES[name] = Strategy(name, fn, needs_code)
        return fn

    return deco


def get_strategy(name: str) -> Strategy:
    try:
        return STRATEGIES[name]
    except KeyError:
        known = ", ".join(sorted(STRATEGIES))
        raise UsageError(f"unknown strategy {name!r}; registered: {known}") from None


@register("interleave-uniform")
def interleave_uniform(fps, rng: np.random.Generator) -> np.ndarray:
    """Each coordinate copied from a uniformly chosen pirate."""
    rows = _rows(fps)
    t, n = rows.shape
    pick = rng.integers(0, t, size=n)
    return rows[pick, np.arange(n)].astype(np.uint8)


@register("envelope-uniform")
def envelope_uniform(fps, rng: np.random.Generator) -> np.ndarray:
    """Uniform over the envelope: each coordinate uniform over the distinct pirate symbols."""
    rows = _rows(fps)
    t, n = rows.shape
    s = np.sort(rows, axis=0)
    is_new = np.vstack([np.ones((1, n), dtype=bool), s[1:] != s[:-1]])
    rank = np.cumsum(is_new, axis=0) - 1
    k = rank[-1] + 1
    r = (rng.random(n) * k).astype(np.int64)
    pos = np.argmax(is_new & (rank == r), axis=0)
    return s[pos, np.arange(n)].astype(np.uint8)


@register("minority-symbol")
def minority_symbol(fps, rng: np.random.Generator) -> np.ndarray:
    """Per coordinate, the least common pirate symbol (smallest symbol on ties)."""
    rows = _rows(fps).astype(np.int64)
    t, n = rows.shape
    q = int(rows.max()) + 1 if rows.size else 1
    counts = np.zeros((q, n), dtype=np.int64)
    np.add.at(counts, (rows, np.broadcast_to(np.arange(n), rows.shape)), 1)
    counts[counts == 0] = t + 1
    return counts.argmin(axis=0).astype(np.uint8)


@register("nearest-innocent", needs_code=True)
def nearest_innocent(
    fps,
    rng: np.random.Generator,
    code: TwoLevelCode | None = None,
    coalition: Sequence[UserId] | None = None,
) -> np.ndarray:
    """Steer the forgery toward the innocent codeword that fits the envelope best.

    Coordinates where the target's symbol is available to the pirates copy it;
    the rest are interleaved.  Without a code or without innocent users this
    is plain :func:`interleave_uniform`.
    """
    rows = _rows(fps)
    y = interleave_uniform(rows, rng)
    if code is None:
        return y
    flat = code.flat()
    if coalition is not None:
        pirate_idx = {(g - 1) * code.M2 + (m - 1) for g, m in coalition}
        innocent = np.array([i not in pirate_idx for i in range(len(flat))])
    else:
        innocent = ~(flat[:, None, :] == rows[None, :, :]).all(axis=2).any(axis=1)
    if not innocent.any():
        return y
    cand = flat[innocent]
    feasible = (cand[:, None, :] == rows[None, :, :]).any(axis=1)  # (innocents, n)
    k = int(feasible.sum(axis=1).argmax())
    return np.where(feasible[k], cand[k], y).astype(np.uint8)
