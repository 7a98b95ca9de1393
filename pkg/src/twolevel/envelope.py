"""The narrow-sense envelope: forgeries whose every symbol comes from some pirate."""
from __future__ import annotations

import itertools
import math
from typing import Iterator

import numpy as np

from .core import UsageError

DEFAULT_ENUMERATION_LIMIT = 2**24


class EnvelopeTooLarge(UsageError):
    def __init__(self, size: int, limit: int):
        super().__init__(f"envelope has {size} elements, above the limit of {limit}")
        self.size = size
        self.limit = limit


def _rows(fps) -> np.ndarray:
    rows = np.asarray(fps)
    if rows.ndim == 1:
        rows = rows[None, :]
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise UsageError("need at least one fingerprint of equal length")
    return rows


def detectable_positions(fps) -> set[int]:
    """1-based coordinates where the pirates' symbols are not all equal."""
    rows = _rows(fps)
    mask = (rows != rows[0]).any(axis=0)
    return {int(i) + 1 for i in np.flatnonzero(mask)}


def column_choices(fps) -> list[np.ndarray]:
    """Sorted distinct pirate symbols at each coordinate."""
    rows = _rows(fps)
    return [np.unique(rows[:, i]) for i in range(rows.shape[1])]


def envelope_contains(fps, y) -> bool:
    rows = _rows(fps)
    y = np.asarray(y)
    if y.shape != rows.shape[1:]:
        raise UsageError("forgery length does not match the fingerprints")
    return bool((rows == y).any(axis=0).all())


def envelope_size(fps) -> int:
    rows = _rows(fps)
    s = np.sort(rows, axis=0)
    distinct = 1 + np.count_nonzero(np.diff(s, axis=0), axis=0)
    return math.prod(int(k) for k in distinct)


def envelope_enumerate(fps, limit: int = DEFAULT_ENUMERATION_LIMIT) -> Iterator[np.ndarray]:
    """Yield every envelope element once, in lexicographic order."""
    size = envelope_size(fps)
    if size > limit:
        raise EnvelopeTooLarge(size, limit)
    choices = column_choices(fps)
    for combo in itertools.product(*choices):
        yield np.array(combo, dtype=np.uint8)


def envelope_array(fps, limit: int = DEFAULT_ENUMERATION_LIMIT) -> np.ndarray:
    """All envelope elements as a ``(size, n)`` array in lexicographic order."""
    rows = _rows(fps)
    size = envelope_size(rows)
    if size > limit:
        raise EnvelopeTooLarge(size, limit)
    choices = column_choices(rows)
    n = rows.shape[1]
    out = np.empty((size, n), dtype=np.uint8)
    # mixed-radix counter, last coordinate fastest
    idx = np.arange(size)
    for i in range(n - 1, -1, -1):
        k = len(choices[i])
        out[:, i] = choices[i][idx % k]
        idx //= k
    return out
