"""
Restricted eigenvalues of the Gram matrix
=========================================

For random covariate subsets of size aleph the restricted Gram matrix
concentrates around the identity once n is large compared with
aleph (L+1) log(p).
"""

import numpy as np

from sparsevcm import BasisSpec, Dataset, DictionarySpec, restricted_eigs, sample_dictionary

p, aleph, Lp1 = 50, 5, 8
for n in (250, 1000, 5000):
    W = sample_dictionary(DictionarySpec("gaussian", p), n, 3)
    t = np.random.default_rng(4).uniform(size=n)
    eigs = restricted_eigs(Dataset(W, t, np.zeros(n), 0.0), BasisSpec("fourier", Lp1), aleph, 100, 5)
    lo = np.array([e[1] for e in eigs])
    hi = np.array([e[2] for e in eigs])
    inside = np.sum((lo >= 0.5) & (hi <= 1.5))
    print(f"n={n:5d}  min lambda_min {lo.min():.3f}  max lambda_max {hi.max():.3f}  inside [0.5, 1.5]: {inside}/100")
