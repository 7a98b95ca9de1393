"""Randomized center-plus-offset construction and code distance parameters.

Group ``i`` gets a uniform center ``R_i`` in ``Q^n``; user ``(i, j)`` gets
``X_ij = R_i + S_ij (mod q)`` where ``S_ij`` is uniform over vectors of
Hamming weight exactly ``w = omega * n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import Provenance, TwoLevelCode, UsageError, check_q
from .rng import check_seed, stream


def integral_weight(omega: float, n: int) -> int:
    """Return ``w = omega * n``, refusing values that are not integers.

    ``omega`` is read through its shortest decimal repr, so ``0.1 * 200``
    counts as exactly 20.
    """
    if not 0.0 <= omega <= 1.0:
        raise UsageError(f"omega must lie in [0, 1], got {omega}")
    w = Fraction(repr(float(omega))) * int(n)
    if w.denominator != 1:
        raise UsageError(f"omega * n = {float(w)} is not an integer (omega={omega}, n={n})")
    return int(w)


@dataclass(frozen=True)
class ConstructionParams:
    q: int
    n: int
    M1: int
    M2: int
    omega: float
    seed: int

    def __post_init__(self):
        check_q(self.q)
        if self.n < 1:
            raise UsageError("n must be positive")
        if self.M1 < 1 or self.M2 < 1:
            raise UsageError("M1 and M2 must be at least 1")
        check_seed(self.seed)
        integral_weight(self.omega, self.n)

    @property
    def w(self) -> int:
        return integral_weight(self.omega, self.n)

    @classmethod
    def from_rates(cls, q, n, R1, R2, omega, seed):
        """Code sizes ``M_i = floor(q ** (n * R_i))`` for a target rate pair."""
        return cls(q, n, users_for_rate(q, n, R1), users_for_rate(q, n, R2), omega, seed)


def users_for_rate(q: int, n: int, R: float) -> int:
    """``floor(q ** (n R))`` computed exactly enough for huge codes."""
    x = Fraction(repr(float(R))) * n
    if x.denominator == 1:
        return int(q) ** int(x)
    return max(int(math.floor(int(q) ** float(x))), 1)


def sample_center(n: int, q: int, rng: np.random.Generator) -> np.ndarray:
    q = check_q(q)
    return rng.integers(0, q, size=n).astype(np.uint8)


def sample_constant_weight(n: int, w: int, q: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the vectors of ``Q^n`` with exactly ``w`` nonzeros."""
    q = check_q(q)
    if not 0 <= w <= n:
        raise UsageError(f"weight w={w} must lie in [0, n={n}]")
    out = np.zeros(n, dtype=np.uint8)
    support = rng.choice(n, size=w, replace=False)
    out[support] = rng.integers(1, q, size=w)
    return out


def center_for(seed: int, group: int, n: int, q: int) -> np.ndarray:
    """Center of 1-based ``group`` in the realization keyed by ``seed``."""
    return sample_center(n, q, stream(seed, "center", group))


def offset_for(seed: int, user, n: int, w: int, q: int) -> np.ndarray:
    g, m = user
    return sample_constant_weight(n, w, q, stream(seed, "offset", g, m))


def build_random_two_level(params: ConstructionParams) -> TwoLevelCode:
    q, n, w, seed = params.q, params.n, params.w, params.seed
    centers = np.stack([center_for(seed, g, n, q) for g in range(1, params.M1 + 1)])
    codewords = np.empty((params.M1, params.M2, n), dtype=np.uint8)
    for g in range(params.M1):
        for m in range(params.M2):
            s = offset_for(seed, (g + 1, m + 1), n, w, q)
            codewords[g, m] = (centers[g].astype(np.int64) + s) % q
    prov = Provenance(omega=params.omega, w=w, seed=seed, centers=centers)
    return TwoLevelCode(q=q, codewords=codewords, provenance=prov)


def random_code(q: int, n: int, M1: int, M2: int, rng: np.random.Generator) -> TwoLevelCode:
    """Code with every codeword i.i.d. uniform on ``Q^n`` (no construction record)."""
    return TwoLevelCode(q=q, codewords=rng.integers(0, q, size=(M1, M2, n)))


def offsets_of(code: TwoLevelCode) -> np.ndarray:
    """``codeword(i, j) - center(i) mod q`` for every user, shape ``(M1, M2, n)``."""
    if code.provenance is None:
        raise UsageError("code has no construction record")
    c = code.provenance.centers.astype(np.int64)[:, None, :]
    return ((code.codewords.astype(np.int64) - c) % code.q).astype(np.uint8)


# -- distances ------------------------------------------------------------


@dataclass(frozen=True)
class DistanceProfile:
    """``d1``/``d2``; an empty minimization is reported as ``n + 1``."""

    d1: int
    d2: int
    n: int

    @property
    def d(self) -> int:
        return min(self.d1, self.d2)

    @property
    def d1_defined(self) -> bool:
        return self.d1 <= self.n

    @property
    def d2_defined(self) -> bool:
        return self.d2 <= self.n

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d1": self.d1,
            "d2": self.d2,
            "d": self.d,
            "d1_defined": self.d1_defined,
            "d2_defined": self.d2_defined,
        }


def min_distances(code: TwoLevelCode, chunk: int = 512) -> DistanceProfile:
    if code.num_users < 2:
        raise UsageError("min_distances needs at least two users")
    flat = code.flat()
    N, n = flat.shape
    groups = np.repeat(np.arange(code.M1), code.M2)
    members = np.tile(np.arange(code.M2), code.M1)
    d1 = d2 = n + 1
    for lo in range(0, N, chunk):
        block = flat[lo : lo + chunk]
        dist = np.count_nonzero(block[:, None, :] != flat[None, :, :], axis=2)
        g_diff = groups[lo : lo + chunk, None] != groups[None, :]
        m_diff = members[lo : lo + chunk, None] != members[None, :]
        if g_diff.any():
            d1 = min(d1, int(dist[g_diff].min()))
        if m_diff.any():
            d2 = min(d2, int(dist[m_diff].min()))
    return DistanceProfile(d1=d1, d2=d2, n=n)


def column_type_counts(fps) -> dict[tuple, int]:
    """How many coordinates show each column pattern across the rows of ``fps``."""
    rows = np.atleast_2d(np.asarray(fps))
    if rows.shape[1] == 0:
        return {}
    cols, counts = np.unique(rows.T, axis=0, return_counts=True)
    return {tuple(int(v) for v in c): int(k) for c, k in zip(cols, counts)}


# -- statistical diagnostics of the constant-weight offsets ----------------


def draw_offsets(n: int, w: int, q: int, count: int, seed: int) -> np.ndarray:
    """``count`` independent uniform weight-``w`` vectors, shape ``(count, n)``."""
    rng = stream(seed, "diagnostics")
    return np.stack([sample_constant_weight(n, w, q, rng) for _ in range(count)])


def offset_pair_diagnostics(samples, n: int, w: int, q: int, eps: float = 0.05) -> dict:
    """Compare empirical offset statistics with their exact and asymptotic values.

    Returns marginals ``P[S_l = a]``, pairwise joints ``P[S_l = a, S_m = b]``
    (``l != m``, ``a, b != 0``), their worst z-scores against the exact finite-n
    values, and for each nonzero symbol the fraction of samples whose symbol
    count leaves ``[n(p - eps), n(p + eps)]`` next to the bound
    ``p(1 - p) / (eps^2 n)``.
    """
    S = np.asarray(samples)
    if S.ndim != 2 or S.shape[1] != n:
        raise UsageError(f"samples must have shape (N, {n})")
    N = S.shape[0]
    if N < 1000:
        raise UsageError("need at least 1000 samples")
    p = w / n / (q - 1)
    marg = np.stack([(S == a).mean(axis=0) for a in range(q)], axis=1)  # (n, q)
    sigma_m = math.sqrt(p * (1 - p) / N) if 0 < p < 1 else 0.0

    exact_joint = w * (w - 1) / (n * (n - 1)) / (q - 1) ** 2 if n > 1 else 0.0
    onehot = np.stack([(S == a) for a in range(1, q)], axis=2).reshape(N, n * (q - 1)).astype(np.float64)
    joint = (onehot.T @ onehot / N).reshape(n, q - 1, n, q - 1)
    off_diag = ~np.eye(n, dtype=bool)
    joint_vals = joint.transpose(0, 2, 1, 3)[off_diag]  # (n(n-1), q-1, q-1)
    sigma_j = math.sqrt(exact_joint * (1 - exact_joint) / N) if 0 < exact_joint < 1 else 0.0

    def zmax(dev, sigma):
        if sigma == 0.0:
            return 0.0 if np.all(dev == 0) else math.inf
        return float(np.abs(dev).max() / sigma)

    marg_dev = marg[:, 1:] - p
    joint_dev = joint_vals - exact_joint
    counts = np.stack([(S == a).sum(axis=1) for a in range(1, q)], axis=1)
    outside = (counts < n * (p - eps)) | (counts > n * (p + eps))
    return {
        "n": n,
        "w": w,
        "q": q,
        "samples": N,
        "marginal_expected": p,
        "marginals": marg.tolist(),
        "marginal_max_abs_dev": float(np.abs(marg_dev).max()) if marg_dev.size else 0.0,
        "marginal_max_z": zmax(marg_dev, sigma_m),
        "joint_exact": exact_joint,
        "joint_asymptotic": p * p,
        "joint_max_abs_dev": float(np.abs(joint_dev).max()) if joint_dev.size else 0.0,
        "joint_max_z": zmax(joint_dev, sigma_j),
        "eps": eps,
        "tail_fraction": outside.mean(axis=0).tolist(),
        "tail_bound": p * (1 - p) / (eps**2 * n),
    }
