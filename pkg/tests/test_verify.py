import itertools

import numpy as np
import pytest

from twolevel.construct import min_distances, random_code
from twolevel.core import OneLevelCode, TwoLevelCode, UsageError, UserId
from twolevel.rng import stream
from twolevel.verify import (
    WorkLimitExceeded,
    as_two_level,
    check_prop1,
    one_per_group_subcode,
    regroup_one_level,
    verify_ta_exhaustive,
    verify_ta_one_level,
)

from conftest import agreement_decode, brute_envelope


def brute_ta(code, t1, t2):
    """Definition check by plain loops: scan Q^n for each coalition's envelope."""
    users = list(code.users())
    for size in range(1, t1 + 1):
        for coal in itertools.combinations(users, size):
            groups = {u.group for u in coal}
            for y in brute_envelope(code.fingerprints(coal), code.q):
                _, closest = agreement_decode(code, y)
                if size <= t2 and any(u not in coal for u in closest):
                    return False
                if any(u.group not in groups for u in closest):
                    return False
    return True


def test_distance_condition_examples(toy_code):
    # t2 = 1 turns the member condition into d2 > 0
    code = TwoLevelCode(q=3, codewords=[[[0, 0, 0], [1, 1, 1]], [[2, 2, 2], [0, 1, 2]]])
    prof = min_distances(code)
    assert check_prop1(code, 2, 1) == (prof.d1 * 4 > 3 * 3)
    dup = TwoLevelCode(q=3, codewords=[[[0, 1, 2]], [[0, 1, 2]]])
    assert not check_prop1(dup, 2, 1)
    with pytest.raises(UsageError):
        check_prop1(toy_code, 2, 2)
    assert check_prop1(TwoLevelCode(q=2, codewords=[[[0, 1]]]), 2, 1)


def test_distance_condition_is_integer_exact():
    # n = 4, t1 = 2: need d1 > 3, i.e. d1 * 4 > 12; d1 = 3 sits exactly on the boundary
    code = TwoLevelCode(q=4, codewords=[[[0, 0, 0, 0]], [[1, 1, 1, 0]]])
    assert not check_prop1(code, 2, 1)
    code = TwoLevelCode(q=4, codewords=[[[0, 0, 0, 0]], [[1, 1, 1, 1]]])
    assert check_prop1(code, 2, 1)


def test_single_user_holds():
    v = verify_ta_exhaustive(TwoLevelCode(q=2, codewords=[[[0, 1, 1]]]), 2, 1)
    assert v.holds and v.coalitions == 1 and v.forgeries == 1


def test_hand_example(toy_code):
    v = verify_ta_exhaustive(toy_code, 2, 1)
    assert v.holds
    # two singletons (1 forgery each) and the pair (4 forgeries)
    assert (v.coalitions, v.forgeries) == (3, 6)
    assert v.to_dict()["work"] == {"coalitions": 3, "forgeries": 6}


def test_counterexample_found_and_rechecked():
    # (1,1) and (1,2) share group 1, so their pair can forge (2,1)'s word
    code = TwoLevelCode(q=2, codewords=[[[0, 0, 1], [1, 1, 0]], [[0, 1, 0], [1, 0, 1]]])
    v = verify_ta_exhaustive(code, 2, 1)
    assert not v.holds and v.counterexample is not None
    assert v.recheck(code)
    assert brute_ta(code, 2, 1) is False
    d = v.to_dict()["counterexample"]
    assert set(d) == {"coalition", "y", "part", "decoded", "distance"}


def test_recheck_rejects_tampered_counterexample():
    code = TwoLevelCode(q=2, codewords=[[[0, 0, 1], [1, 1, 0]], [[0, 1, 0], [1, 0, 1]]])
    v = verify_ta_exhaustive(code, 2, 1)
    from dataclasses import replace

    bad = replace(v, counterexample=replace(v.counterexample, distance=v.counterexample.distance + 1))
    assert not bad.recheck(code)


def test_matches_brute_oracle(rng):
    agree = 0
    for _ in range(120):
        q = int(rng.integers(2, 4))
        n = int(rng.integers(1, 5))
        M1, M2 = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        code = random_code(q, n, M1, M2, rng)
        for t1, t2 in ((2, 1), (3, 2), (2, 0)):
            v = verify_ta_exhaustive(code, t1, t2)
            assert v.holds == brute_ta(code, t1, t2)
            if not v.holds:
                assert v.recheck(code)
            agree += 1
    assert agree == 360


def test_every_counterexample_rechecks(rng):
    found = 0
    for _ in range(200):
        code = random_code(int(rng.integers(2, 5)), int(rng.integers(2, 7)), int(rng.integers(1, 4)), int(rng.integers(1, 4)), rng)
        for t1, t2 in ((2, 1), (3, 2), (3, 1)):
            v = verify_ta_exhaustive(code, t1, t2)
            if not v.holds:
                found += 1
                assert v.recheck(code)
    assert found > 50


def test_monotone_in_thresholds(rng):
    for _ in range(60):
        code = random_code(int(rng.integers(3, 9)), int(rng.integers(2, 7)), int(rng.integers(1, 4)), int(rng.integers(1, 4)), rng)
        big = verify_ta_exhaustive(code, 3, 2)
        if big.holds:
            for t1, t2 in ((3, 1), (2, 1), (3, 0), (2, 0), (1, 0)):
                assert verify_ta_exhaustive(code, t1, t2).holds


def test_subset_coalitions_inherit_part_a(rng):
    # part (a) at t2 with adversarial ties => every smaller coalition is traced too
    checked = 0
    for _ in range(40):
        code = random_code(8, 4, 2, 2, rng)
        if not verify_ta_exhaustive(code, 3, 2).holds:
            continue
        for pair in itertools.combinations(code.users(), 2):
            for sub in itertools.combinations(pair, 1):
                for y in brute_envelope(code.fingerprints(sub), code.q):
                    _, closest = agreement_decode(code, y)
                    assert set(closest) <= set(sub)
                    checked += 1
    assert checked > 0


def test_distance_condition_not_necessary():
    """Random search for a TA code that fails the distance test."""
    rng = stream(11, "necessity")
    for _ in range(2000):
        code = random_code(3, 4, 2, 2, rng)
        if not check_prop1(code, 2, 1) and verify_ta_exhaustive(code, 2, 1).holds:
            assert brute_ta(code, 2, 1)
            return
    pytest.fail("no witness found")


def test_work_limit():
    code = random_code(4, 10, 3, 4, stream(1, "big"))
    with pytest.raises(WorkLimitExceeded) as err:
        verify_ta_exhaustive(code, 3, 2, work_limit=1000)
    assert err.value.estimate > 1000
    with pytest.raises(UsageError):
        verify_ta_exhaustive(code, 2, 2)


def test_workers_give_identical_verdict():
    rng = stream(3, "workers")
    seen_failure = False
    for _ in range(6):
        code = random_code(3, 6, 3, 3, rng)
        a = verify_ta_exhaustive(code, 3, 2, workers=1)
        b = verify_ta_exhaustive(code, 3, 2, workers=3)
        assert a == b
        seen_failure |= not a.holds
    assert seen_failure


# -- code transformations --------------------------------------------------


def test_subcode_projection(toy_code):
    code = TwoLevelCode(q=2, codewords=[[[0, 0], [0, 1]], [[1, 1], [1, 0]]])
    sub = one_per_group_subcode(code, 1)
    assert sub.codewords.tolist() == [[0, 0], [1, 1]]
    assert one_per_group_subcode(code, [2, 1]).codewords.tolist() == [[0, 1], [1, 1]]
    assert one_per_group_subcode(code, lambda g: 3 - g).codewords.tolist() == [[0, 1], [1, 1]]
    assert np.array_equal(one_per_group_subcode(toy_code).codewords, toy_code.flat())  # M2 = 1
    with pytest.raises(UsageError):
        one_per_group_subcode(code, [1])


def test_regroup_shapes():
    flat = OneLevelCode(q=3, codewords=np.arange(18).reshape(6, 3) % 3)
    assert regroup_one_level(flat, 1, 6).M1 == 1
    assert regroup_one_level(flat, 6, 1).M2 == 1
    assert np.array_equal(regroup_one_level(flat, 2, 3).codeword((2, 1)), flat.codewords[3])
    assert np.array_equal(as_two_level(flat).flat(), flat.codewords)
    with pytest.raises(UsageError):
        regroup_one_level(flat, 4, 2)


def test_subcode_inherits_traceability():
    rng = stream(21, "remark-sub")
    transferred = 0
    for _ in range(40):
        code = random_code(64, 6, int(rng.integers(2, 5)), int(rng.integers(1, 4)), rng)
        for t1, t2 in ((2, 1), (3, 2)):
            if verify_ta_exhaustive(code, t1, t2).holds:
                sel = [int(rng.integers(1, code.M2 + 1)) for _ in range(code.M1)]
                assert verify_ta_one_level(one_per_group_subcode(code, sel), t1).holds
                transferred += 1
    assert transferred >= 20


def test_regroup_inherits_traceability():
    rng = stream(22, "remark-regroup")
    transferred = 0
    for _ in range(60):
        M1, M2 = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        flat = OneLevelCode(q=int(rng.integers(3, 16)), codewords=rng.integers(0, 3, size=(M1 * M2, 5)))
        for t in (2, 3):
            if verify_ta_one_level(flat, t).holds:
                for t2 in range(1, t):
                    assert verify_ta_exhaustive(regroup_one_level(flat, M1, M2), t, t2).holds
                    transferred += 1
    assert transferred >= 20
