"""Print the achievable (R1, R2) limits along an omega grid."""
from twolevel.rates import entropy_q, region_point

for q, t1, t2 in ((2, 2, 1), (3, 3, 2), (5, 3, 2)):
    print(f"q={q} t1={t1} t2={t2}")
    for omega in (0.02, 0.05, 0.1, 0.2):
        p = region_point(q, t1, t2, omega)
        if not p.feasible:
            print(f"  omega={omega:<5} infeasible")
            continue
        print(f"  omega={omega:<5} R1 < {p.R1_sup:.4f}  R2 < {p.R2_sup:.4f}  h(omega)={entropy_q(omega, q):.4f}")
