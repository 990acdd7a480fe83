"""Orthonormal bases of L2([0, 1]) with phi_0 = 1.

Two families are provided:

* ``fourier``: phi_{2m-1}(t) = sqrt(2) sin(2 pi m t), phi_{2m}(t) = sqrt(2) cos(2 pi m t)
* ``haar``: periodic Haar wavelets, phi_j = psi_{h,i} with j = 2**h + i,
  psi_{h,i}(t) = 2**(h/2) psi(2**h t - i).

Every evaluator accepts scalars or arrays of times and returns rows of basis
values, one row per time point.
"""
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BasisSpec",
    "eval_basis",
    "basis_matrix",
    "gram_phi",
    "check_sum_bound",
    "haar_mother",
]

KINDS = ("fourier", "haar")
# sum-bound constants: Fourier amplitude is sqrt(2); Haar needs 2 * ||psi||_inf
DEFAULT_C_PHI = {"fourier": np.sqrt(2.0), "haar": 2.0}


@dataclass(frozen=True)
class BasisSpec:
    """Basis family, number of functions phi_0..phi_L and the constant C_phi."""

    kind: str
    L_plus_1: int
    c_phi: float = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind in ("periodichaar", "periodic_haar"):
            kind = "haar"
        if kind not in KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        if int(self.L_plus_1) != self.L_plus_1 or self.L_plus_1 < 1:
            raise ValueError("L_plus_1 must be a positive integer")
        object.__setattr__(self, "L_plus_1", int(self.L_plus_1))
        if self.c_phi is None:
            object.__setattr__(self, "c_phi", float(DEFAULT_C_PHI[kind]))
        elif not self.c_phi > 0:
            raise ValueError("c_phi must be positive")

    @property
    def L(self):
        return self.L_plus_1 - 1

    def with_size(self, L_plus_1):
        """Same family and constant with a different number of functions."""
        return BasisSpec(self.kind, L_plus_1, self.c_phi)


def haar_mother(x):
    """Haar mother wavelet: 1 on [0, 1/2), -1 on [1/2, 1), 0 elsewhere."""
    x = np.asarray(x, dtype=float)
    return np.where((x >= 0.0) & (x < 0.5), 1.0, np.where((x >= 0.5) & (x < 1.0), -1.0, 0.0))


def _check_times(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("basis evaluation points must lie in [0, 1]")
    return t


def _fourier(t, L_plus_1):
    out = np.empty(t.shape + (L_plus_1,))
    out[..., 0] = 1.0
    if L_plus_1 > 1:
        m = (np.arange(1, L_plus_1) + 1) // 2
        arg = 2.0 * np.pi * t[..., None] * m
        is_sin = (np.arange(1, L_plus_1) % 2) == 1
        out[..., 1:] = np.sqrt(2.0) * np.where(is_sin, np.sin(arg), np.cos(arg))
    return out


def _haar(t, L_plus_1):
    out = np.empty(t.shape + (L_plus_1,))
    out[..., 0] = 1.0
    if L_plus_1 > 1:
        j = np.arange(1, L_plus_1)
        h = np.floor(np.log2(j)).astype(int)
        i = j - 2 ** h
        # periodic on [0, 1): t = 1 is identified with t = 0
        tp = np.mod(t, 1.0)[..., None]
        out[..., 1:] = 2.0 ** (h / 2.0) * haar_mother(2.0 ** h * tp - i)
    return out


def basis_matrix(spec, times):
    """Matrix with rows (phi_0(t_i), ..., phi_L(t_i)); shape ``times.shape + (L+1,)``."""
    t = _check_times(times)
    if spec.kind == "fourier":
        return _fourier(t, spec.L_plus_1)
    return _haar(t, spec.L_plus_1)


def eval_basis(spec, t):
    """Values (phi_0(t), ..., phi_L(t)) at a single point ``t`` in [0, 1]."""
    t = _check_times(t)
    if t.ndim != 0:
        raise ValueError("eval_basis takes a scalar time; use basis_matrix for arrays")
    return basis_matrix(spec, t)


def gram_phi(spec, times):
    """Empirical Gram matrix n^-1 sum_i phi(t_i) phi(t_i)^T."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size == 0:
        raise ValueError("gram_phi needs at least one time point")
    P = basis_matrix(spec, times.ravel())
    G = P.T @ P / P.shape[0]
    return 0.5 * (G + G.T)


def check_sum_bound(spec, grid_size=4097):
    """Check sum_{k<=l} phi_k(t)^2 <= c_phi^2 (l+1) on a uniform grid, all l <= L.

    Returns
    -------
    ok : bool
        True iff the worst ratio is at most 1 + 1e-12.
    worst : float
        Largest value of sum_{k<=l} phi_k(t)^2 / (c_phi^2 (l+1)) seen.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    t = np.linspace(0.0, 1.0, int(grid_size))
    P = basis_matrix(spec, t)
    partial = np.cumsum(P ** 2, axis=1)
    ratio = partial / (spec.c_phi ** 2 * np.arange(1, spec.L_plus_1 + 1))
    worst = float(ratio.max())
    return worst <= 1.0 + 1e-12, worst
