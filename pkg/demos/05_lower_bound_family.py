"""
Test functions behind the lower bound
=====================================

Build a family of coefficient matrices indexed by binary codewords with
large pairwise Hamming distance.  Every member respects the smoothness
budget and the pairwise risk is available in closed form.
"""

import itertools

import numpy as np

from sparsevcm import build_test_family, l2_risk, total_distance

fam = build_test_family(s=2, s0=2, n=8192, r=2.0, C_a=1.0, sigma=0.5, kappa=0.1,
                        omega_max_s=1.0, phi_max=1.0, rng_seed=0, max_size=16)
print(f"{len(fam.omegas)} codewords of length {fam.omegas.shape[1]}")

D = np.sum(fam.omegas[:, None, :] != fam.omegas[None, :, :], axis=2)
np.fill_diagonal(D, D.max())
print("minimum pairwise Hamming distance:", D.min())

mats = fam.all_coefficients()
gap = max(abs(total_distance(fam, fam.omegas[a], fam.omegas[b]) - l2_risk(mats[a], mats[b]))
          for a, b in itertools.combinations(range(len(mats)), 2))
print(f"closed-form vs coefficient-space distance, max gap {gap:.1e}")
