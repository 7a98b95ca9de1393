"""Exhaustively check (2, 1)-traceability of a tiny code, and show a failure."""
from twolevel import ConstructionParams, TwoLevelCode, build_random_two_level, check_prop1, verify_ta_exhaustive

code = build_random_two_level(ConstructionParams(q=16, n=6, M1=3, M2=2, omega=0.5, seed=4))
print("distance condition met:", check_prop1(code, 2, 1))
verdict = verify_ta_exhaustive(code, t1=2, t2=1)
print("exhaustive verdict:", verdict.holds, verdict.to_dict()["work"])

bad = TwoLevelCode(q=2, codewords=[[[0, 0, 1], [1, 1, 0]], [[0, 1, 0], [1, 0, 1]]])
verdict = verify_ta_exhaustive(bad, t1=2, t2=1)
cx = verdict.counterexample
print("binary toy holds:", verdict.holds)
print(f"  coalition {cx.coalition} forges {cx.y}, decoder returns {cx.decoded}")
print("  counterexample rechecks:", verdict.recheck(bad))
