"""Tensor design of the varying coefficient regression and its Gram matrices.

Row i of the design is vec(phi(t_i) W_i^T) with the basis index running
fastest, i.e. column j*(L+1) + k holds phi_k(t_i) * W_i^(j).
"""
import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .basis import basis_matrix, gram_phi
from .model import block_norms

__all__ = [
    "Dataset",
    "DesignAssembly",
    "GramEstimates",
    "assemble_design",
    "gram",
    "kronecker_gram",
    "restricted_eigs",
    "cone_condition_probe",
    "write_dataset_csv",
    "read_dataset_csv",
]


@dataclass(frozen=True)
class Dataset:
    """Observations (W_i, t_i, Y_i), i = 1..n, with known noise level sigma.

    ``W`` has shape (p, n): column i is the covariate vector W_i.
    """

    W: np.ndarray
    times: np.ndarray
    Y: np.ndarray
    sigma: float

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        t = np.asarray(self.times, dtype=float).ravel()
        Y = np.asarray(self.Y, dtype=float).ravel()
        if W.shape[1] != t.size or Y.size != t.size:
            raise ValueError(
                f"inconsistent sizes: W {W.shape}, times {t.size}, Y {Y.size}"
            )
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(t)) and np.all(np.isfinite(Y))):
            raise ValueError("dataset entries must be finite")
        if np.any(t < 0) or np.any(t > 1):
            raise ValueError("times must lie in [0, 1]")
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError("sigma must be a finite nonnegative number")
        for name, arr in (("W", W), ("times", t), ("Y", Y)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self):
        return self.times.size

    @property
    def p(self):
        return self.W.shape[0]


@dataclass(frozen=True)
class DesignAssembly:
    """Explicit n x p(L+1) design matrix ``B``."""

    B: np.ndarray
    p: int
    L_plus_1: int


@dataclass(frozen=True)
class GramEstimates:
    Sigma_hat: np.ndarray
    Omega_hat: np.ndarray
    Phi_hat: np.ndarray


def _require_nonempty(data):
    if data.n == 0:
        raise ValueError("dataset has no observations")


def assemble_design(data, spec):
    """Build B with rows vec(phi(t_i) W_i^T); no normalisation."""
    _require_nonempty(data)
    P = basis_matrix(spec, data.times)  # n x (L+1)
    B = (data.W.T[:, :, None] * P[:, None, :]).reshape(data.n, -1)
    return DesignAssembly(B, data.p, spec.L_plus_1)


def kronecker_gram(data, spec):
    """n^-1 sum_i Omega_i (x) Phi_i, accumulated one observation at a time."""
    _require_nonempty(data)
    P = basis_matrix(spec, data.times)
    m = data.p * spec.L_plus_1
    S = np.zeros((m, m))
    for i in range(data.n):
        w = data.W[:, i]
        phi = P[i]
        S += np.kron(np.outer(w, w), np.outer(phi, phi))
    return S / data.n


def gram(data, spec, method="auto", max_kron_bytes=64 * 2 ** 20):
    """Gram estimates Sigma_hat = n^-1 B^T B, Omega_hat and Phi_hat.

    ``method`` is ``"kron"`` (sum of Kronecker products), ``"direct"`` (B^T B)
    or ``"auto"``, which uses the Kronecker sum when n * (p(L+1))^2 doubles fit
    in ``max_kron_bytes``.
    """
    _require_nonempty(data)
    m = data.p * spec.L_plus_1
    if method == "auto":
        method = "kron" if 8 * data.n * m * m <= max_kron_bytes else "direct"
    if method == "kron":
        S = kronecker_gram(data, spec)
    elif method == "direct":
        B = assemble_design(data, spec).B
        S = B.T @ B / data.n
    else:
        raise ValueError(f"unknown method {method!r}")
    S = 0.5 * (S + S.T)
    Omega = data.W @ data.W.T / data.n
    return GramEstimates(S, Omega, gram_phi(spec, data.times))


def _subset_columns(subset, L_plus_1):
    subset = np.asarray(subset, dtype=np.intp)
    return (subset[:, None] * L_plus_1 + np.arange(L_plus_1)).ravel()


def restricted_eigs(data, spec, aleph, num_draws, rng_seed, threads=1, Sigma_hat=None):
    """Extreme eigenvalues of Sigma_hat restricted to random covariate subsets.

    Each draw picks ``aleph`` covariates uniformly without replacement and keeps
    all basis indices of those covariates.  Draws use independent streams
    spawned from ``rng_seed``, so the output does not depend on ``threads``.

    Returns
    -------
    list of (subset, lambda_min, lambda_max)
    """
    if not 1 <= aleph <= data.p:
        raise ValueError(f"aleph must lie in 1..p={data.p}, got {aleph}")
    S = gram(data, spec).Sigma_hat if Sigma_hat is None else Sigma_hat
    streams = np.random.SeedSequence(rng_seed).spawn(num_draws)

    def one(ss):
        rng = np.random.default_rng(ss)
        subset = np.sort(rng.choice(data.p, size=aleph, replace=False))
        cols = _subset_columns(subset, spec.L_plus_1)
        ev = np.linalg.eigvalsh(S[np.ix_(cols, cols)])
        return tuple(int(j) for j in subset), float(ev[0]), float(ev[-1])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, streams))
    return [one(ss) for ss in streams]


def cone_condition_probe(data, spec, layout, support, num_probes, rng_seed):
    """Smallest observed ||B v||^2 / (n ||v||^2) over random v in the block cone.

    The cone holds vectors whose off-support block norms sum to at most three
    times the on-support sum.  Each probe draws Gaussian values on the support
    blocks and a random off-support direction whose block-norm mass is a
    uniform fraction of that allowance.  This is a randomised diagnostic, not a
    certified minimum.

    Parameters
    ----------
    support : iterable of (j, l)
        Block indices (covariate j, block l) forming the support J_0.
    """
    support = sorted(set((int(j), int(l)) for j, l in support))
    if not support:
        raise ValueError("support J_0 must be non-empty")
    B = assemble_design(data, spec).B
    p, m = data.p, spec.L_plus_1
    block_id = np.array([layout.block_of(k) for k in range(m)])
    on = np.zeros((p, m), dtype=bool)
    for j, l in support:
        on[j, block_id == l] = True
    rng = np.random.default_rng(rng_seed)
    nb = layout.M + 1
    best = np.inf
    for _ in range(num_probes):
        v = np.where(on, rng.standard_normal((p, m)), 0.0)
        on_mass = np.sum(block_norms(v, layout))
        off = np.where(on, 0.0, rng.standard_normal((p, m)))
        off_mass = np.sum(block_norms(off, layout))
        if off_mass > 0 and nb * p > len(support):
            off *= rng.uniform(0.0, 3.0) * on_mass / off_mass
        v = (v + off).ravel()
        nv = v @ v
        if nv == 0:
            continue
        Bv = B @ v
        best = min(best, float(Bv @ Bv) / (data.n * nv))
    return best


def write_dataset_csv(data, path):
    """Write ``i,t,Y,W_1,...,W_p`` with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "t", "Y"] + [f"W_{j + 1}" for j in range(data.p)])
        for i in range(data.n):
            row = [i + 1, data.times[i], data.Y[i]] + list(data.W[:, i])
            w.writerow([row[0]] + [format(float(x), ".17g") for x in row[1:]])


def read_dataset_csv(path, sigma):
    """Load a dataset written by :func:`write_dataset_csv`; sigma is supplied."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header[:3] != ["i", "t", "Y"] or len(header) < 4:
            raise ValueError(f"{path}: expected header i,t,Y,W_1,...,W_p")
        p = len(header) - 3
        if header[3:] != [f"W_{j + 1}" for j in range(p)]:
            raise ValueError(f"{path}: covariate columns must be W_1..W_{p}")
        recs = [[float(x) for x in rec[1:]] for rec in reader if rec]
    if not recs:
        raise ValueError(f"{path}: no observations")
    arr = np.asarray(recs)
    if arr.shape[1] != p + 2:
        raise ValueError(f"{path}: ragged rows")
    return Dataset(arr[:, 2:].T, arr[:, 0], arr[:, 1], sigma)
