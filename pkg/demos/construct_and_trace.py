"""Draw a random two-level code, forge a fingerprint and trace it."""
import numpy as np

from twolevel import ConstructionParams, build_random_two_level, envelope_contains, md_decode, min_distances
from twolevel.attacks import interleave_uniform

params = ConstructionParams(q=4, n=120, M1=16, M2=8, omega=0.2, seed=11)
code = build_random_two_level(params)
prof = min_distances(code)
print(f"q={code.q} n={code.n} groups={code.M1} members={code.M2}")
print(f"d1={prof.d1} (across groups)  d2={prof.d2} (within a group)")

coalition = [(3, 1), (9, 4)]
fps = code.fingerprints(coalition)
y = interleave_uniform(fps, np.random.default_rng(5))
assert envelope_contains(fps, y)

res = md_decode(code, y)
print(f"coalition {coalition} -> decoded user {tuple(res.user)} at distance {res.distance}")
print("pirate caught" if tuple(res.user) in coalition else "innocent accused")
