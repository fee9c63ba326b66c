"""Repair an indefinite direct estimate with positive-definite shrinkage.

With few samples and many higher-level variables, the direct estimate of
R is often not positive semi-definite.
"""
import warnings

import numpy as np

from latcorr import derive_unique_sets, estimate_direct, shrink_estimate
from latcorr.shrinkage import min_eigenvalue
from latcorr.simulation import fne, generate_data, generate_truth

truth = generate_truth(p=30, q=200, diag_value=2.5, seed=5)
sets = derive_unique_sets(truth.binding)

for seed in range(10, 40):
    z = generate_data(truth, n=25, seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cov = estimate_direct(z, sets)
    if cov.diag_valid.all() and min_eigenvalue(cov.r_hat) < 0:
        break
print("smallest eigenvalue of the direct estimate:", round(min_eigenvalue(cov.r_hat), 4))

res = shrink_estimate(z, sets, cov, kappa="cv", B=10, seed=0)
print("kappa chosen by cross-validation:", res.kappa)
print("rho:", round(res.rho, 4), " binding constraint:", res.binding)
print("smallest eigenvalue after shrinkage:", round(res.lambda_min_sh, 4))

# off-diagonal entries are scaled by the same factor
off = ~np.eye(30, dtype=bool)
print("ratio r_sh / r_dir:", np.unique(np.round(res.r_sh[off] / cov.r_hat[off], 12)))
print("FNE direct:", round(fne(cov.r_hat, truth.r), 3), " shrunk:", round(fne(res.r_sh, truth.r), 3))
