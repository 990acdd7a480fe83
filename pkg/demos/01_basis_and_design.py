"""
Bases, blocks and the design matrix
===================================

Evaluate the Fourier and Haar systems, check their orthonormality on a
fine grid, then build the design for a small sample and compare its Gram
matrix with the Kronecker-sum shortcut.
"""

import numpy as np

from sparsevcm import BasisSpec, BlockLayout, Dataset, assemble_design, basis_matrix, kronecker_gram

# %%
# Orthonormality on a midpoint grid
t = (np.arange(4096) + 0.5) / 4096
for kind in ("fourier", "haar"):
    Phi = basis_matrix(BasisSpec(kind, 8), t)
    G = Phi.T @ Phi / t.size
    print(f"{kind:8s} max |G - I| = {np.abs(G - np.eye(8)).max():.2e}")

# %%
# Block layout: the constant coefficient sits alone, the rest are grouped by ~log n
layout = BlockLayout.for_sample_size(16, 200)
print("block starts:", layout.starts, "block size d =", layout.d)

# %%
# Design columns are covariate times basis function, basis index fastest
rng = np.random.default_rng(0)
n, p = 200, 3
data = Dataset(rng.normal(size=(p, n)), rng.uniform(size=n), np.zeros(n), 1.0)
spec = BasisSpec("fourier", 16)
B = assemble_design(data, spec).B
print("design shape:", B.shape)

S = kronecker_gram(data, spec)
print("||B'B/n - kron sum|| =", np.linalg.norm(B.T @ B / n - S))
