"""Monte Carlo error rates of the random construction as n grows.

Two pirates exceed the member-level guarantee (one pirate), so e2 need not
shrink; the group-level error e1 should.
"""
from twolevel.sim import SweepTemplate, estimate_errors

t = SweepTemplate(q=2, R1=0.05, R2=0.1, omega=0.1, seed=3, trials=2000, engine="implicit")
print(f"{'n':>5} {'e2_hat':>8} {'e1_hat':>8} {'P[e1] (conditional)':>20}")
for n in (40, 80, 160):
    est = estimate_errors(t.spec_for(n))
    print(f"{n:>5} {est.e2_hat:>8.4f} {est.e1_hat:>8.4f} {est.p_e1:>20.3e}")
