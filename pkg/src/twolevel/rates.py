"""Achievable-rate machinery for the center-plus-offset construction.

Everything is base-q: logarithms are natural-log ratios, ``0 log 0 = 0``, and
any term ``c * h(u / c)`` with ``c = 0`` is taken to be 0.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .core import UsageError, check_q

_TOL = 1e-12


def _h(x, q):
    """Vectorized q-ary entropy without argument checks; ``x`` is clipped to [0, 1]."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(x > 0, -x * (np.log(x) - math.log(q - 1)), 0.0)
        b = np.where(x < 1, -(1 - x) * np.log1p(-x), 0.0)
    return (a + b) / math.log(q)


def entropy_q(x, q: int):
    """``-x log_q(x/(q-1)) - (1-x) log_q(1-x)``; scalar in, scalar out."""
    q = check_q(q)
    arr = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise UsageError(f"entropy argument must lie in [0, 1], got {x}")
    out = _h(arr, q)
    return float(out) if out.ndim == 0 else out


def _ch(c, u, q):
    """``c * h(u / c)`` with the ``c = 0`` convention."""
    c = np.asarray(c, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    pos = c > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(pos, u / np.where(pos, c, 1.0), 0.0)
    return np.where(pos, c * _h(r, q), 0.0)


def delta1(omega: float, q: int) -> float:
    return 0.5 * (1 - (1 - omega) ** 2 - omega**2 / (q - 1))


def delta2(omega: float, q: int) -> float:
    return 0.5 * (1 - 1 / q)


def _phi(w, g, a, b, q):
    lq = math.log(q)
    return (
        _ch(1 - g, a, q)
        + _ch(g - b, w - a - b, q)
        + _ch(g, b, q)
        + (w - a) * (math.log(q - 2) - math.log(q - 1)) / lq
        - b * math.log(q - 2) / lq
    )


class PhiArgs(NamedTuple):
    omega: float
    gamma: float
    alpha: float
    beta: float
    q: int

    def check(self) -> "PhiArgs":
        w, g, a, b, q = self
        if q < 3:
            raise UsageError("phi needs q >= 3")
        if not all(-_TOL <= v <= 1 + _TOL for v in (w, g, a, b)):
            raise UsageError(f"phi arguments must lie in [0, 1]: {self}")
        if a > 1 - g + _TOL or b > g + _TOL or a + b > w + _TOL or w - a > g + _TOL:
            raise UsageError(f"phi arguments violate alpha<=1-gamma, beta<=gamma, alpha+beta<=omega, omega-alpha<=gamma: {self}")
        return self


def phi(omega: float, gamma: float, alpha: float, beta: float, q: int) -> float:
    PhiArgs(omega, gamma, alpha, beta, q).check()
    return float(_phi(omega, gamma, alpha, beta, q))


def closed_form_maximizer(omega: float, gamma: float, q: int) -> tuple[float, float]:
    """``(alpha, beta)`` maximizing phi for fixed ``(omega, gamma)`` when unconstrained."""
    return omega * (1 - gamma), omega * gamma / (q - 1)


def phi_grid_max(omega: float, gamma: float, q: int, step: float = 1e-3, delta: float | None = None) -> PhiMax:
    """Plain 2-D grid max of phi over (alpha, beta) at fixed ``(omega, gamma)``.

    Only the domain constraints apply, plus ``gamma - beta + alpha <= delta``
    when ``delta`` is given.  Independent of the bisection used by ``f1``/``f2``.
    """
    PhiArgs(omega, gamma, max(0.0, omega - gamma), 0.0, q).check()
    a = _grid(max(0.0, omega - gamma), min(1.0 - gamma, omega), step)
    b = _grid(0.0, min(gamma, omega), step)
    best = PhiMax(-math.inf, gamma, math.nan, math.nan)
    rows = max(1, (1 << 22) // len(b))
    for lo in range(0, len(a), rows):
        A, B = np.meshgrid(a[lo : lo + rows], b, indexing="ij")
        ok = A + B <= omega + _TOL
        if delta is not None:
            ok &= gamma - B + A <= delta + _TOL
        vals = np.where(ok, _phi(omega, gamma, A, np.minimum(B, omega - A), q), -np.inf)
        i = np.unravel_index(int(np.argmax(vals)), vals.shape)
        if vals[i] > best.value:
            best = PhiMax(float(vals[i]), gamma, float(A[i]), float(B[i]))
    return best


def bound_D(omega: float, q: int) -> float:
    if q < 3:
        raise UsageError("D(omega) needs q >= 3")
    lq = math.log(q)
    return omega**3 * (math.log((q - 1) / (q - 2)) / lq + math.log(q - 2) / lq / (q - 1))


# -- constrained maximization of phi --------------------------------------


@dataclass(frozen=True)
class SearchConfig:
    step: float = 1e-3
    refine_rounds: int = 2
    refine_factor: int = 10
    inject_closed_form: bool = True


class PhiMax(NamedTuple):
    value: float
    gamma: float
    alpha: float
    beta: float


@dataclass(frozen=True)
class _Problem:
    omega: float
    q: int
    g_lo: float
    g_hi: float
    delta: float

    def a_range(self, g):
        return np.maximum(0.0, self.omega - g), np.minimum(1.0 - g, self.omega)

    def b_range(self, g, a):
        return np.maximum(0.0, g + a - self.delta), np.minimum(g, self.omega - a)

    def feasible(self, g, a, b):
        w = self.omega
        return (
            (g >= self.g_lo - _TOL) & (g <= self.g_hi + _TOL)
            & (a >= -_TOL) & (b >= -_TOL)
            & (a <= 1 - g + _TOL) & (b <= g + _TOL)
            & (a + b <= w + _TOL) & (w - a <= g + _TOL)
            & (g - b + a <= self.delta + _TOL)
        )


def _problem(omega: float, q: int, which: int, delta: float | None = None) -> _Problem:
    if q < 3:
        raise UsageError("f1/f2 need q >= 3")
    if not 0 <= omega <= 1:
        raise UsageError(f"omega must lie in [0, 1], got {omega}")
    if which == 1:
        lo, hi, d = omega**2, 1 - (1 - omega) ** 2, delta1(omega, q)
    else:
        lo, hi, d = omega * (q - 1) / q, 1 - (1 - omega) / q, delta2(omega, q)
    return _Problem(omega, q, lo, hi, d if delta is None else delta)


def _grid(lo, hi, step):
    k = int(math.floor((hi - lo) / step + 1e-9))
    pts = lo + step * np.arange(k + 1)
    if hi - pts[-1] > 1e-12:
        pts = np.append(pts, hi)
    return pts


def _coarse(prob: _Problem, step: float) -> PhiMax:
    """Grid max; for each (gamma, alpha) the beta grid is searched by bisection (phi is concave in beta)."""
    w, q = prob.omega, prob.q
    gammas = _grid(prob.g_lo, prob.g_hi, step) if prob.g_hi >= prob.g_lo - _TOL else np.empty(0)
    if gammas.size == 0:
        return PhiMax(-math.inf, math.nan, math.nan, math.nan)
    gammas = np.minimum(gammas, prob.g_hi)
    ka = int(math.ceil(w / step)) + 1
    G = np.repeat(gammas, ka + 1)
    a_lo, a_hi = prob.a_range(G)
    A = np.minimum(a_lo + step * np.tile(np.arange(ka + 1), len(gammas)), a_hi)
    b_lo, b_hi = prob.b_range(G, A)
    ok = (a_hi >= a_lo - _TOL) & (b_hi >= b_lo - _TOL)
    G, A, b_lo, b_hi = G[ok], A[ok], b_lo[ok], np.maximum(b_hi[ok], b_lo[ok])
    if G.size == 0:
        return PhiMax(-math.inf, math.nan, math.nan, math.nan)

    jmax = np.floor((b_hi - b_lo) / step + 1e-9).astype(np.int64)
    jmax = np.where(b_lo + step * jmax < b_hi - 1e-12, jmax + 1, jmax)  # include b_hi

    def beta(j):
        return np.minimum(b_lo + step * j, b_hi)

    lo = np.zeros_like(jmax)
    hi = jmax.copy()
    while np.any(lo < hi):
        mid = (lo + hi) // 2
        act = lo < hi
        f0 = _phi(w, G, A, beta(mid), q)
        f1 = _phi(w, G, A, beta(mid + 1), q)
        up = act & (f1 > f0)
        lo = np.where(up, mid + 1, lo)
        hi = np.where(act & ~up, mid, hi)
    B = beta(lo)
    vals = _phi(w, G, A, B, q)
    i = int(np.argmax(vals))
    return PhiMax(float(vals[i]), float(G[i]), float(A[i]), float(B[i]))


def _closed_form_candidates(prob: _Problem, step: float) -> PhiMax:
    w, q = prob.omega, prob.q
    G = _grid(prob.g_lo, prob.g_hi, step)
    A, B = closed_form_maximizer(w, G, q)
    excess = np.maximum(G - B + A - prob.delta, 0.0)
    A, B = A - excess / 2, B + excess / 2
    a_lo, a_hi = prob.a_range(G)
    A = np.clip(A, a_lo, a_hi)
    b_lo, b_hi = prob.b_range(G, A)
    B = np.clip(B, b_lo, b_hi)
    ok = prob.feasible(G, A, B)
    if not ok.any():
        return PhiMax(-math.inf, math.nan, math.nan, math.nan)
    vals = np.where(ok, _phi(w, G, A, B, q), -np.inf)
    i = int(np.argmax(vals))
    return PhiMax(float(vals[i]), float(G[i]), float(A[i]), float(B[i]))


def _refine(prob: _Problem, best: PhiMax, step: float) -> PhiMax:
    offs = step * np.arange(-10, 11) / 10
    G, A, B = np.meshgrid(best.gamma + offs, best.alpha + offs, best.beta + offs, indexing="ij")
    G, A, B = G.ravel(), A.ravel(), B.ravel()
    ok = prob.feasible(G, A, B) & (G >= 0) & (G <= 1)
    if not ok.any():
        return best
    vals = np.where(ok, _phi(prob.omega, G, np.maximum(A, 0), np.maximum(B, 0), prob.q), -np.inf)
    i = int(np.argmax(vals))
    if vals[i] > best.value:
        return PhiMax(float(vals[i]), float(G[i]), float(max(A[i], 0)), float(max(B[i], 0)))
    return best


def maximize_phi(omega: float, q: int, which: int, cfg: SearchConfig = SearchConfig(), delta: float | None = None) -> PhiMax:
    """Maximize phi over the f1 (``which=1``) or f2 (``which=2``) constraint set.

    ``delta`` overrides the distance budget of the constraint
    ``gamma - beta + alpha <= delta``.
    """
    prob = _problem(omega, q, which, delta)
    best = _coarse(prob, cfg.step)
    if cfg.inject_closed_form:
        cand = _closed_form_candidates(prob, cfg.step)
        if cand.value > best.value:
            best = cand
    if not math.isfinite(best.value):
        return best
    step = cfg.step
    for _ in range(cfg.refine_rounds):
        best = _refine(prob, best, step)
        step /= cfg.refine_factor
    return best


def f1(omega: float, q: int, cfg: SearchConfig = SearchConfig()) -> float:
    return maximize_phi(omega, q, 1, cfg).value


def f2(omega: float, q: int, cfg: SearchConfig = SearchConfig()) -> float:
    return maximize_phi(omega, q, 2, cfg).value


# -- region boundaries -----------------------------------------------------


@dataclass(frozen=True)
class RegionPoint:
    """Strict upper limits on (R1, R2) at one ``omega``; ``None`` when infeasible."""

    omega: float
    R1_sup: float | None
    R2_sup: float | None
    feasible: bool
    f1: float | None = None
    f2: float | None = None
    D: float | None = None


def _infeasible(omega):
    return RegionPoint(omega, None, None, False)


def group_load(q: int, t: int) -> float:
    """``((t-1)/t)(1 - q^-(t-1))``: the fraction a size-t coalition can move toward an outside center."""
    return (t - 1) / t * (1 - float(q) ** -(t - 1))


def t1_feasible(q: int, t: int, omega: float) -> bool:
    return 0 <= omega <= 1 and group_load(q, t) + omega <= (q - 1) / q + _TOL


def region_21(q: int, omega: float) -> RegionPoint:
    q = check_q(q)
    top = (q - 1) / (2 * q)
    if not 0 <= omega <= top + _TOL:
        return _infeasible(omega)
    arg = min(top + omega, (q - 1) / q)
    return RegionPoint(omega, 1 - float(_h(arg, q)), float(_h(omega, q)), True)


def region_t1(q: int, t: int, omega: float) -> RegionPoint:
    q = check_q(q)
    if t < 2:
        raise UsageError("coalition size t must be at least 2")
    if not t1_feasible(q, t, omega):
        return _infeasible(omega)
    arg = min(group_load(q, t) + omega, (q - 1) / q)
    return RegionPoint(omega, 1 - float(_h(arg, q)), float(_h(omega, q)), True)


def region_t2(q: int, t: int, omega: float, cfg: SearchConfig = SearchConfig()) -> RegionPoint:
    q = check_q(q)
    if q < 3:
        raise UsageError("(t, 2) regions need q >= 3")
    if t < 3:
        raise UsageError("(t, 2) regions need t >= 3")
    base = region_t1(q, t, omega)
    if not base.feasible:
        return base
    a, b = f1(omega, q, cfg), f2(omega, q, cfg)
    r2 = float(_h(omega, q)) - max(a, b)
    if r2 > -_TOL:
        r2 = max(r2, 0.0) + 0.0  # round-off around an exact zero, and no -0.0
    return RegionPoint(omega, base.R1_sup, r2, True, f1=a, f2=b, D=bound_D(omega, q))


def region_point(q: int, t1: int, t2: int, omega: float, cfg: SearchConfig = SearchConfig()) -> RegionPoint:
    if t2 == 1:
        if t1 < 2:
            raise UsageError("need t1 > t2")
        return region_21(q, omega) if t1 == 2 else region_t1(q, t1, omega)
    if t2 == 2:
        if t1 < 3:
            raise UsageError("need t1 > t2")
        return region_t2(q, t1, omega, cfg)
    raise UsageError(f"only t2 in {{1, 2}} is supported, got {t2}")


def parse_grid(spec: str) -> list[float]:
    """``"start:stop:step"`` (stop inclusive) or a comma-separated list."""
    if ":" in spec:
        try:
            start, stop, step = (float(p) for p in spec.split(":"))
        except ValueError:
            raise UsageError(f"bad grid {spec!r}; expected start:stop:step") from None
        if step <= 0 or stop < start:
            raise UsageError(f"bad grid {spec!r}")
        k = int(math.floor((stop - start) / step + 1e-9))
        return [round(start + i * step, 12) for i in range(k + 1)]
    try:
        return [float(p) for p in spec.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"bad grid {spec!r}") from None


REFERENCE_LINES_BINARY_21 = (
    ("one_level_2fp_R1_upper", 0.25),
    ("one_level_2fp_md_R1_plus_R2_inner", 0.188),
)
CSV_COLUMNS = ("omega", "R1_sup", "R2_sup", "feasible")


def _fmt(v):
    return "" if v is None else repr(float(v))


def emit_region(q: int, t1: int, t2: int, omega_grid: Iterable[float], cfg: SearchConfig = SearchConfig()) -> str:
    """CSV text: ``#`` comment lines with parameters and reference lines, then the table."""
    if t2 not in (1, 2):
        raise UsageError(f"only t2 in {{1, 2}} is supported, got {t2}")
    points = [region_point(q, t1, t2, float(w), cfg) for w in omega_grid]
    buf = io.StringIO()
    buf.write(f"# q={q} t1={t1} t2={t2} step={cfg.step!r} refine_rounds={cfg.refine_rounds}\n")
    buf.write("# reference outer_R1_plus_R2=1\n")
    if q == 2 and t1 == 2 and t2 == 1:
        for name, value in REFERENCE_LINES_BINARY_21:
            buf.write(f"# reference {name}={value!r}\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for p in points:
        buf.write(f"{_fmt(p.omega)},{_fmt(p.R1_sup)},{_fmt(p.R2_sup)},{int(p.feasible)}\n")
    return buf.getvalue()


def read_region_csv(text: str) -> tuple[dict[str, float], list[RegionPoint]]:
    """Parse :func:`emit_region` output back into reference values and points."""
    refs: dict[str, float] = {}
    rows: list[RegionPoint] = []
    header_seen = False
    for line in text.splitlines():
        if line.startswith("# reference "):
            name, _, value = line[len("# reference ") :].partition("=")
            refs[name] = float(value)
        elif line.startswith("#") or not line.strip():
            continue
        elif not header_seen:
            if tuple(line.split(",")) != CSV_COLUMNS:
                raise UsageError(f"unexpected header {line!r}")
            header_seen = True
        else:
            w, r1, r2, ok = line.split(",")
            rows.append(RegionPoint(float(w), float(r1) if r1 else None, float(r2) if r2 else None, ok == "1"))
    return refs, rows


def feasibility_witness(q: int, t: int, step: float = 1e-3) -> float | None:
    """Largest grid ``omega > 0`` meeting the (t, 1) feasibility condition, if any."""
    top = (q - 1) / q - group_load(q, t)
    if top <= 0:
        return None
    k = int(math.floor(top / step + 1e-9))
    return k * step if k >= 1 else (top if top > 0 else None)
