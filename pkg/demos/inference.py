"""Test |r| <= xi for every pair and adjust for multiplicity."""
import numpy as np

from latcorr import derive_unique_sets, estimate_direct, infer_all
from latcorr.simulation import generate_data, generate_truth

truth = generate_truth(p=8, q=60, diag_value=1.5, seed=3)
sets = derive_unique_sets(truth.binding)
z = generate_data(truth, n=300, seed=4)
cov = estimate_direct(z, sets)

xi = 0.1
res = infer_all(z, sets, cov, xi=xi)
print(f"{len(res.records)} pairs tested against |r| <= {xi}")

print(" l  k   true  r_hat  p_bh")
for rec, q in zip(res.records, res.p_bh):
    flag = "*" if q < 0.05 else ""
    print(f"{rec.l:2d} {rec.k:2d} {truth.r[rec.l, rec.k]:6.3f} {rec.r_hat:6.3f} {q:6.3f} {flag}")

# pairs above the margin are the alternatives
truly_large = sum(abs(truth.r[r.l, r.k]) > xi for r in res.records)
found = sum(q < 0.05 for q in res.p_bh)
print("pairs with |r| > xi:", truly_large, " rejected at BH 0.05:", found)
