"""Aggregation baselines next to the direct estimate.

Averaging all members, including shared ones, mixes the signal of several
higher-level variables and inflates their correlation.
"""
import numpy as np

from latcorr import derive_unique_sets, estimate_direct
from latcorr.aggregators import METHODS, aggregate, baseline_correlation
from latcorr.simulation import fne, generate_data, generate_truth

truth = generate_truth(p=10, q=80, diag_value=1.5, seed=6)
sets = derive_unique_sets(truth.binding)
z = generate_data(truth, n=200, seed=7)

iu = np.triu_indices(10, 1)
null = np.abs(truth.r[iu]) <= 0.1
errors = {"DIR": fne(estimate_direct(z, sets).r_hat, truth.r)}
offset = {}
for m in METHODS:
    r, _ = baseline_correlation(aggregate(z, truth.binding, sets, m))
    errors[m] = fne(r, truth.r)
    offset[m] = np.mean(r[iu][null] - truth.r[iu][null])

print("method    FNE   mean error on null pairs")
for m, e in sorted(errors.items(), key=lambda kv: kv[1]):
    b = f"{offset[m]:+.3f}" if m in offset else ""
    print(f"{m:8s} {e:5.2f}  {b}")
