"""Hamming-space primitives and the two-level code container.

Fingerprints are stored as ``uint8`` numpy vectors, so the alphabet size is
limited to ``2 <= q <= 256``.  User identities are 1-based ``(group, member)``
pairs in every public interface; the codeword array itself is indexed 0-based.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

MAX_Q = 256


class UsageError(ValueError):
    """Raised when an operation is called outside its preconditions."""


def check_q(q: int) -> int:
    q = int(q)
    if q < 2 or q > MAX_Q:
        raise UsageError(f"alphabet size must satisfy 2 <= q <= {MAX_Q}, got {q}")
    return q


def as_fingerprint(x, q: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a read-only uint8 vector, validating symbols against ``q``."""
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise UsageError(f"fingerprint must be one-dimensional, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() >= (q if q is not None else MAX_Q)):
        raise UsageError(f"symbols out of range for q={q}")
    out = arr.astype(np.uint8, copy=True)
    out.setflags(write=False)
    return out


def _pair(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise UsageError(f"length mismatch: {a.shape} vs {b.shape}")
    return a, b


def hamming_distance(a, b) -> int:
    a, b = _pair(a, b)
    return int(np.count_nonzero(a != b))


def weight(a) -> int:
    return int(np.count_nonzero(np.asarray(a)))


def dist_to_set(ys, y) -> int:
    """Minimum Hamming distance from ``y`` to any member of ``ys``."""
    rows = np.asarray(list(ys) if not isinstance(ys, np.ndarray) else ys)
    if rows.size == 0 or len(rows) == 0:
        raise UsageError("dist_to_set needs a nonempty set")
    y = np.asarray(y)
    if rows.ndim != 2 or rows.shape[1] != y.shape[0]:
        raise UsageError("length mismatch between set members and y")
    return int(np.count_nonzero(rows != y, axis=1).min())


def add_mod_q(a, b, q: int) -> np.ndarray:
    q = check_q(q)
    a, b = _pair(a, b)
    return as_fingerprint((a.astype(np.int64) + b.astype(np.int64)) % q, q)


def sub_mod_q(a, b, q: int) -> np.ndarray:
    q = check_q(q)
    a, b = _pair(a, b)
    return as_fingerprint((a.astype(np.int64) - b.astype(np.int64)) % q, q)


class UserId(NamedTuple):
    """1-based ``(group, member)`` identity."""

    group: int
    member: int

    def __str__(self):
        return f"{self.group}:{self.member}"

    @classmethod
    def parse(cls, text: str) -> "UserId":
        g, _, m = text.partition(":")
        try:
            return cls(int(g), int(m))
        except ValueError:
            raise UsageError(f"user id must look like GROUP:MEMBER, got {text!r}") from None


class RatePair(NamedTuple):
    R1: float
    R2: float


def rate_pair(n: int, M1: int, M2: int, q: int) -> RatePair:
    return RatePair(math.log(M1, q) / n, math.log(M2, q) / n)


@dataclass(frozen=True)
class Provenance:
    """How a code was drawn: offset weight, master seed and the group centers."""

    omega: float
    w: int
    seed: int
    centers: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "omega": self.omega,
            "w": self.w,
            "seed": self.seed,
            "centers": self.centers.tolist(),
        }


@dataclass(frozen=True, eq=False)
class TwoLevelCode:
    """Codeword assignment ``[M1] x [M2] -> Q^n``.

    ``codewords`` has shape ``(M1, M2, n)``; ``codewords[i, j]`` belongs to
    user ``(i + 1, j + 1)``.
    """

    q: int
    codewords: np.ndarray = field(repr=False)
    provenance: Provenance | None = None

    def __post_init__(self):
        check_q(self.q)
        cw = np.asarray(self.codewords)
        if cw.ndim != 3 or min(cw.shape[:2]) < 1:
            raise UsageError(f"codewords must have shape (M1, M2, n), got {cw.shape}")
        if cw.size and int(cw.max()) >= self.q:
            raise UsageError(f"codeword symbols must be < q={self.q}")
        cw = cw.astype(np.uint8, copy=True)
        cw.setflags(write=False)
        object.__setattr__(self, "codewords", cw)
        if self.provenance is not None:
            centers = np.asarray(self.provenance.centers, dtype=np.uint8).copy()
            if centers.shape != (self.M1, self.n):
                raise UsageError("provenance centers must have shape (M1, n)")
            centers.setflags(write=False)
            object.__setattr__(self.provenance, "centers", centers)

    @property
    def M1(self) -> int:
        return self.codewords.shape[0]

    @property
    def M2(self) -> int:
        return self.codewords.shape[1]

    @property
    def n(self) -> int:
        return self.codewords.shape[2]

    @property
    def num_users(self) -> int:
        return self.M1 * self.M2

    def codeword(self, user) -> np.ndarray:
        g, m = self._check_user(user)
        return self.codewords[g - 1, m - 1]

    def center(self, group: int) -> np.ndarray:
        if self.provenance is None:
            raise UsageError("code has no construction record")
        return self.provenance.centers[group - 1]

    def _check_user(self, user) -> UserId:
        u = UserId(*user)
        if not (1 <= u.group <= self.M1 and 1 <= u.member <= self.M2):
            raise UsageError(f"user {u} outside [{self.M1}] x [{self.M2}]")
        return u

    def users(self) -> Iterable[UserId]:
        for g in range(1, self.M1 + 1):
            for m in range(1, self.M2 + 1):
                yield UserId(g, m)

    def flat(self) -> np.ndarray:
        """All codewords as an ``(M1*M2, n)`` array in row-major user order."""
        return self.codewords.reshape(self.num_users, self.n)

    def fingerprints(self, users: Sequence) -> np.ndarray:
        return np.stack([self.codeword(u) for u in users])

    def rates(self) -> RatePair:
        return rate_pair(self.n, self.M1, self.M2, self.q)

    def __eq__(self, other):
        if not isinstance(other, TwoLevelCode):
            return NotImplemented
        same_prov = (self.provenance is None) == (other.provenance is None)
        if same_prov and self.provenance is not None:
            a, b = self.provenance, other.provenance
            same_prov = (a.omega, a.w, a.seed) == (b.omega, b.w, b.seed) and np.array_equal(
                a.centers, b.centers
            )
        return self.q == other.q and np.array_equal(self.codewords, other.codewords) and same_prov

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "q": self.q,
            "n": self.n,
            "M1": self.M1,
            "M2": self.M2,
            "codewords": [[row.tolist() for row in group] for group in self.codewords],
        }
        if self.provenance is not None:
            d["provenance"] = self.provenance.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TwoLevelCode":
        try:
            q, n, M1, M2 = (int(d[k]) for k in ("q", "n", "M1", "M2"))
            cw = np.asarray(d["codewords"], dtype=np.int64)
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"malformed code document: {exc}") from None
        if cw.shape != (M1, M2, n):
            raise UsageError(f"codewords shape {cw.shape} does not match (M1, M2, n)=({M1}, {M2}, {n})")
        if cw.size and cw.min() < 0:
            raise UsageError("negative symbol in codewords")
        prov = None
        if d.get("provenance") is not None:
            p = d["provenance"]
            prov = Provenance(
                omega=float(p["omega"]),
                w=int(p["w"]),
                seed=int(p["seed"]),
                centers=np.asarray(p["centers"], dtype=np.int64),
            )
        return cls(q=q, codewords=cw, provenance=prov)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"), sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "TwoLevelCode":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: not valid JSON ({exc})") from None


@dataclass(frozen=True, eq=False)
class OneLevelCode:
    """Plain ``[M] -> Q^n`` code; ``codewords`` has shape ``(M, n)``."""

    q: int
    codewords: np.ndarray = field(repr=False)

    def __post_init__(self):
        check_q(self.q)
        cw = np.asarray(self.codewords)
        if cw.ndim != 2 or cw.shape[0] < 1:
            raise UsageError(f"codewords must have shape (M, n), got {cw.shape}")
        cw = cw.astype(np.uint8, copy=True)
        cw.setflags(write=False)
        object.__setattr__(self, "codewords", cw)

    @property
    def M(self) -> int:
        return self.codewords.shape[0]

    @property
    def n(self) -> int:
        return self.codewords.shape[1]

    def __eq__(self, other):
        if not isinstance(other, OneLevelCode):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.codewords, other.codewords)
