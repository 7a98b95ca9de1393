import itertools
import math

import numpy as np
import pytest

from twolevel.attacks import interleave_uniform
from twolevel.construct import ConstructionParams, build_random_two_level
from twolevel.core import UsageError, UserId
from twolevel.decode import minimizers
from twolevel.rates import entropy_q
from twolevel.rng import derive_seed, stream
from twolevel.sim import (
    ErrorEstimate,
    SweepTemplate,
    TrialSpec,
    coalition_pattern,
    estimate_errors,
    offset_distance_logcdf,
    run_trial,
    sweep_blocklength,
)


def small_spec(**kw):
    params = kw.pop("params", ConstructionParams(q=3, n=20, M1=8, M2=8, omega=0.25, seed=5))
    kw.setdefault("coalition", coalition_pattern(2, "distinct"))
    kw.setdefault("trials", 400)
    return TrialSpec(construction=params, **kw)


def test_coalition_pattern():
    assert coalition_pattern(3, "distinct") == (UserId(1, 1), UserId(2, 1), UserId(3, 1))
    assert coalition_pattern(2, "same") == (UserId(1, 1), UserId(1, 2))
    with pytest.raises(UsageError):
        coalition_pattern(0, "same")
    with pytest.raises(UsageError):
        coalition_pattern(2, "mixed")


def test_spec_validation():
    with pytest.raises(UsageError):
        small_spec(coalition=[(9, 1)])
    with pytest.raises(UsageError):
        small_spec(coalition=[(1, 1), (1, 1)])
    with pytest.raises(UsageError):
        small_spec(trials=0)
    with pytest.raises(UsageError):
        small_spec(strategy="nope")
    with pytest.raises(UsageError):
        small_spec(engine="implicit", tiebreak="lex-first")
    with pytest.raises(UsageError):
        small_spec(engine="implicit", strategy="nearest-innocent")
    assert small_spec().resolved_engine == "explicit"


def test_single_user_never_errs():
    params = ConstructionParams(q=2, n=10, M1=1, M2=1, omega=0.2, seed=1)
    for engine in ("explicit", "implicit"):
        est = estimate_errors(TrialSpec(params, ((1, 1),), trials=50, engine=engine))
        assert est.e2_count == 0 and est.e1_count == 0


def test_single_pirate_forges_own_word():
    spec = small_spec(coalition=((3, 4),), trials=200)
    for i in range(200):
        out = run_trial(spec, i)
        assert out.pirate_distance == 0
        assert out.e2 == (out.innocent_distance == 0)


def test_replay_same_index_same_outcome():
    for engine in ("explicit", "implicit"):
        spec = small_spec(engine=engine)
        assert [run_trial(spec, i) for i in range(30)] == [run_trial(spec, i) for i in range(30)]


def test_explicit_trial_recomputed_by_hand():
    spec = small_spec(tiebreak="adversarial")
    for i in range(20):
        out = run_trial(spec, i)
        code = build_random_two_level(ConstructionParams(3, 20, 8, 8, 0.25, derive_seed(5, "trial", i)))
        y = interleave_uniform(code.fingerprints(spec.coalition), stream(5, "forge", i))
        dmin, closest = minimizers(code, y)
        assert out.e2 == any(u not in spec.coalition for u in closest)
        assert out.e1 == any(u.group not in (1, 2) for u in closest)
        assert min(out.pirate_distance, out.innocent_distance) == dmin


@pytest.mark.parametrize("policy", ["adversarial", "lex-first", "strict-fail"])
@pytest.mark.parametrize("strategy", ["interleave-uniform", "envelope-uniform", "minority-symbol", "nearest-innocent"])
def test_event_inclusion_every_trial(policy, strategy):
    for layout in ("distinct", "same"):
        spec = small_spec(coalition=coalition_pattern(3, layout), tiebreak=policy, strategy=strategy, trials=150,
                          params=ConstructionParams(q=2, n=12, M1=4, M2=4, omega=0.25, seed=3))
        for i in range(spec.trials):
            out = run_trial(spec, i)
            assert out.e2 or not out.e1


def test_strict_fail_reports_ties():
    spec = small_spec(tiebreak="strict-fail", trials=400, params=ConstructionParams(q=2, n=8, M1=4, M2=4, omega=0.25, seed=2))
    est = estimate_errors(spec)
    assert est.events["tie_failure"] > 0
    assert est.e1_hat <= est.e2_hat + est.tie_failure_fraction


def test_estimate_invariants():
    est = estimate_errors(small_spec(trials=300))
    assert est.e1_hat <= est.e2_hat
    for k, (lo, hi) in ((est.e1_hat, est.e1_ci), (est.e2_hat, est.e2_ci)):
        assert lo <= k <= hi
    assert sum(est.events.values()) == est.e2_count
    d = est.to_dict()
    assert set(d["events"]) == {"same_group", "other_group", "tie_failure"}


def test_wilson_interval_value():
    est = ErrorEstimate(trials=100, e1_count=0, e2_count=10)
    lo, hi = est.e2_ci
    z = 1.959963984540054
    p, n = 0.1, 100
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    assert lo == pytest.approx(centre - half, abs=1e-9) and hi == pytest.approx(centre + half, abs=1e-9)
    assert est.e1_ci[0] == 0.0


def test_workers_do_not_change_estimates():
    for engine in ("explicit", "implicit"):
        spec = small_spec(engine=engine, trials=240)
        assert estimate_errors(spec, workers=1) == estimate_errors(spec, workers=3)


def test_offset_distance_table_matches_enumeration():
    for n, w, q in ((4, 2, 3), (5, 2, 2), (4, 3, 4), (5, 1, 3)):
        table = np.exp(offset_distance_logcdf(n, w, q))
        space = [s for s in itertools.product(range(q), repeat=n) if sum(1 for v in s if v) == w]
        for k in range(n + 1):
            z = (1,) * k + (0,) * (n - k)
            d = np.array([sum(1 for a, b in zip(s, z) if a != b) for s in space])
            cdf = np.array([(d <= j).mean() for j in range(n + 1)])
            assert np.allclose(table[k], cdf, atol=1e-12)


@pytest.mark.parametrize("layout", ["distinct", "same"])
def test_engines_agree(layout):
    params = ConstructionParams(q=3, n=20, M1=8, M2=8, omega=0.25, seed=44)
    kw = dict(construction=params, coalition=coalition_pattern(2, layout), trials=3000)
    ex = estimate_errors(TrialSpec(engine="explicit", **kw))
    im = estimate_errors(TrialSpec(engine="implicit", **kw))
    for a, b in ((ex.e1_count, im.e1_count), (ex.e2_count, im.e2_count)):
        p = (a + b) / (2 * kw["trials"])
        sigma = math.sqrt(max(p * (1 - p), 1e-12) * 2 / kw["trials"])
        assert abs(a - b) / kw["trials"] <= 4 * sigma + 1e-12
    # the conditional probabilities estimate the same quantities
    assert abs(im.p_e2 - ex.e2_hat) <= 4 * math.sqrt(max(ex.e2_hat * (1 - ex.e2_hat), 1e-4) / kw["trials"])


def test_rates_outside_region_collide():
    # R2 > h(omega): members of a group collide, so even a lone pirate is often mis-traced
    t = SweepTemplate(q=2, R1=0.05, R2=0.7, omega=0.1, seed=1, coalition_size=1, trials=200)
    assert 0.7 > entropy_q(0.1, 2)
    est = estimate_errors(t.spec_for(40))
    assert est.e2_hat > 0.9


def test_sweep_table():
    t = SweepTemplate(q=2, R1=0.1, R2=0.2, omega=0.1, seed=3, trials=50, engine="implicit")
    csv, results = sweep_blocklength(t, [20, 40, 60])
    lines = [ln for ln in csv.splitlines() if not ln.startswith("#")]
    assert len(lines) == 1 + 3 and len(results) == 3
    header = lines[0].split(",")
    for n, ln in zip((20, 40, 60), lines[1:]):
        row = dict(zip(header, ln.split(",")))
        assert int(row["M1"]) == 2 ** round(n * 0.1) and int(row["M2"]) == 2 ** round(n * 0.2)
    assert csv == sweep_blocklength(t, [20, 40, 60])[0]
    with pytest.raises(UsageError):
        sweep_blocklength(t, [25])


def test_layouts_measured_separately():
    params = ConstructionParams(q=2, n=20, M1=8, M2=8, omega=0.2, seed=8)
    same = estimate_errors(TrialSpec(params, coalition_pattern(2, "same"), trials=500))
    dist = estimate_errors(TrialSpec(params, coalition_pattern(2, "distinct"), trials=500))
    # both cases run and are reported; a same-group coalition cannot frame its own group
    assert same.e1_count <= same.e2_count and dist.e1_count <= dist.e2_count
    assert same.events["same_group"] + same.events["other_group"] == same.e2_count
