"""Coefficient matrices, block layout, block norm and exact L2 risk.

A coefficient matrix ``A`` has shape (p, L+1); entry (j, k) is the coefficient
of basis function phi_k in the expansion of f_j.  Flattening ``A`` row-major
gives the parameter vector alpha with index j*(L+1) + k, matching the column
order of the design matrix.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .basis import basis_matrix

__all__ = [
    "BlockLayout",
    "CoefficientMatrix",
    "TruthSpec",
    "TruthReport",
    "block_norm",
    "block_norms",
    "reconstruct",
    "l2_risk",
    "risk_split",
    "generate_truth",
    "validate_truth",
    "a3_budget",
    "write_coefficients_csv",
    "read_coefficients_csv",
]

KAPPA_PAD = 0.01


def block_size_for(n):
    """Block size d = max(1, floor(log n)), natural logarithm."""
    return max(1, int(math.floor(math.log(n)))) if n >= 1 else 1


@dataclass(frozen=True)
class BlockLayout:
    """Partition of the basis indices 0..L into K_0 = {0} and blocks of size d.

    K_1..K_{M-1} have exactly ``d`` indices and K_M is allowed to be short.
    """

    L_plus_1: int
    d: int

    def __post_init__(self):
        if self.L_plus_1 < 1 or self.d < 1:
            raise ValueError("BlockLayout needs L_plus_1 >= 1 and d >= 1")
        object.__setattr__(self, "L_plus_1", int(self.L_plus_1))
        object.__setattr__(self, "d", int(self.d))

    @classmethod
    def for_sample_size(cls, L_plus_1, n):
        return cls(L_plus_1, block_size_for(n))

    @property
    def M(self):
        return -(-(self.L_plus_1 - 1) // self.d)

    @property
    def starts(self):
        """Start column of every block, K_0 first."""
        return np.concatenate(([0], np.arange(1, self.L_plus_1, self.d))).astype(np.intp)

    @property
    def block_index_sets(self):
        edges = list(self.starts) + [self.L_plus_1]
        return [range(edges[l], edges[l + 1]) for l in range(self.M + 1)]

    @property
    def sizes(self):
        return np.diff(np.append(self.starts, self.L_plus_1))

    def block_of(self, k):
        """Block number l with k in K_l."""
        return 0 if k == 0 else 1 + (k - 1) // self.d

    def resized(self, L_plus_1):
        return BlockLayout(L_plus_1, self.d)


def block_norms(entries, layout):
    """Array of shape (p, M+1) with the Euclidean norm of every block a_{jl}."""
    entries = np.atleast_2d(np.asarray(entries, dtype=float))
    sq = np.add.reduceat(entries ** 2, layout.starts, axis=1)
    return np.sqrt(sq)


@dataclass
class CoefficientMatrix:
    """Basis coefficients a_{jk} of p functions together with their block layout."""

    entries: np.ndarray
    layout: BlockLayout

    def __post_init__(self):
        self.entries = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if self.entries.shape[1] != self.layout.L_plus_1:
            raise ValueError(
                f"entries have {self.entries.shape[1]} columns but layout expects "
                f"{self.layout.L_plus_1}"
            )
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("coefficient entries must be finite")

    @property
    def p(self):
        return self.entries.shape[0]

    @property
    def L_plus_1(self):
        return self.entries.shape[1]

    @classmethod
    def zeros(cls, p, layout):
        return cls(np.zeros((p, layout.L_plus_1)), layout)

    def block(self, j, l):
        return self.entries[j, self.layout.block_index_sets[l]]

    def vec(self):
        """Parameter vector with index j*(L+1) + k."""
        return self.entries.ravel().copy()

    def truncated(self, L_plus_1):
        """First ``L_plus_1`` columns, zero-padded if the matrix is narrower."""
        out = np.zeros((self.p, L_plus_1))
        m = min(L_plus_1, self.L_plus_1)
        out[:, :m] = self.entries[:, :m]
        return CoefficientMatrix(out, self.layout.resized(L_plus_1))


def block_norm(A):
    """Block norm sum_j sum_l ||a_{jl}||_2."""
    return float(block_norms(A.entries, A.layout).sum())


def reconstruct(A, spec, t):
    """Values (f_1(t), ..., f_p(t)) of the expansion sum_k a_{jk} phi_k(t).

    ``t`` may be a scalar or an array; for an array the result has shape
    ``t.shape + (p,)``.
    """
    if spec.L_plus_1 != A.L_plus_1:
        raise ValueError(
            f"basis has {spec.L_plus_1} functions but coefficients have {A.L_plus_1} columns"
        )
    return basis_matrix(spec, t) @ A.entries.T


def risk_split(A_hat, A_true):
    """Coefficient-space squared error split into (within the fitted basis, truth tail).

    The fitted matrix may have fewer columns than the truth; truth columns beyond
    the fit are counted in the tail term.  A fit wider than the truth is
    compared against the zero-padded truth.
    """
    if A_hat.p != A_true.p:
        raise ValueError(f"row mismatch: {A_hat.p} vs {A_true.p}")
    m = A_hat.L_plus_1
    truth_in = A_true.truncated(m).entries
    infit = float(np.sum((A_hat.entries - truth_in) ** 2))
    tail = float(np.sum(A_true.entries[:, m:] ** 2)) if A_true.L_plus_1 > m else 0.0
    return infit, tail


def l2_risk(A_hat, A_true, allow_tail=False):
    """Squared Frobenius distance; equals ||f_hat - f||_2^2 by Parseval.

    With ``allow_tail`` the truth may have more columns than the fit and its
    extra mass is added; otherwise the shapes must agree.
    """
    if not allow_tail and A_hat.entries.shape != A_true.entries.shape:
        raise ValueError(
            f"shape mismatch: {A_hat.entries.shape} vs {A_true.entries.shape}"
        )
    infit, tail = risk_split(A_hat, A_true)
    return infit + tail


def _as_tuple(value, s, name):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (s,)) if s else np.zeros(0)
    if arr.shape != (s,):
        raise ValueError(f"{name} must be a scalar or have length {s}")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class TruthSpec:
    """Sparsity pattern and smoothness of the true coefficient functions.

    ``nu`` and ``r`` hold one value per index in ``varying_indices``.
    """

    p: int
    varying_indices: tuple
    constant_indices: tuple
    nu: tuple
    r: tuple
    C_a: float = 1.0

    def __post_init__(self):
        var = tuple(int(j) for j in self.varying_indices)
        con = tuple(int(j) for j in self.constant_indices)
        object.__setattr__(self, "varying_indices", var)
        object.__setattr__(self, "constant_indices", con)
        object.__setattr__(self, "nu", _as_tuple(self.nu, len(var), "nu"))
        object.__setattr__(self, "r", _as_tuple(self.r, len(var), "r"))
        if len(set(var)) != len(var) or len(set(con)) != len(con):
            raise ValueError("index sets must not contain duplicates")
        if set(var) & set(con):
            raise ValueError("varying and constant index sets must be disjoint")
        if len(var) + len(con) > self.p:
            raise ValueError(f"s + s0 = {len(var) + len(con)} exceeds p = {self.p}")
        if any(j < 0 or j >= self.p for j in var + con):
            raise ValueError("indices must lie in 0..p-1")
        for nu, r in zip(self.nu, self.r):
            if nu < 1:
                raise ValueError("nu must be at least 1")
            if not r > min(0.5, 1.0 / nu):
                raise ValueError("r must exceed min(1/2, 1/nu)")
        if not self.C_a > 0:
            raise ValueError("C_a must be positive")

    @classmethod
    def leading(cls, p, s, s0, nu=2.0, r=2.0, C_a=1.0):
        """Varying functions 0..s-1, constants s..s+s0-1, the rest zero."""
        if s + s0 > p:
            raise ValueError(f"s + s0 = {s + s0} exceeds p = {p}")
        return cls(p, tuple(range(s)), tuple(range(s, s + s0)), nu, r, C_a)

    @property
    def s(self):
        return len(self.varying_indices)

    @property
    def s0(self):
        return len(self.constant_indices)

    def r_prime(self, idx):
        return self.r[idx] + 0.5 - 1.0 / self.nu[idx]

    def smoothness(self, j):
        """(nu_j, r_j) of a varying function j."""
        i = self.varying_indices.index(j)
        return self.nu[i], self.r[i]

    @property
    def support(self):
        return set(self.varying_indices) | set(self.constant_indices)


def a3_budget(coeffs, nu, r):
    """Weighted sum sum_k |a_k|^nu (k+1)^(nu r'), r' = r + 1/2 - 1/nu."""
    a = np.asarray(coeffs, dtype=float)
    rp = r + 0.5 - 1.0 / nu
    k1 = np.arange(1, a.size + 1, dtype=float)
    return float(np.sum(np.abs(a) ** nu * k1 ** (nu * rp)))


def generate_truth(spec, layout, rng_seed, n_coef=None):
    """Draw a coefficient matrix obeying the sparsity pattern and A3 budget.

    Varying rows follow a power law a_k = sign_k c (k+1)^-(r' + 1/nu + 0.01)
    with c chosen so the A3 budget is used to a factor in [0.9^nu, 1].
    Constant rows have a_{j0} ~ U[C_a/2, C_a].

    Parameters
    ----------
    spec : TruthSpec
    layout : BlockLayout
        Estimation layout; its block size is reused for the returned matrix.
    rng_seed : int or numpy SeedSequence
    n_coef : int, optional
        Length of the finite expansion; defaults to 2 * layout.L_plus_1.
    """
    n_coef = 2 * layout.L_plus_1 if n_coef is None else int(n_coef)
    rng = np.random.default_rng(rng_seed)
    A = np.zeros((spec.p, n_coef))
    k1 = np.arange(1, n_coef + 1, dtype=float)
    for idx, j in enumerate(spec.varying_indices):
        nu, r = spec.nu[idx], spec.r[idx]
        rp = r + 0.5 - 1.0 / nu
        shape = k1 ** (-(rp + 1.0 / nu + KAPPA_PAD))
        signs = rng.choice([-1.0, 1.0], size=n_coef)
        scale = spec.C_a * rng.uniform(0.9, 1.0) / a3_budget(shape, nu, r) ** (1.0 / nu)
        A[j] = signs * scale * shape
    for j in spec.constant_indices:
        A[j, 0] = rng.uniform(spec.C_a / 2.0, spec.C_a)
    return CoefficientMatrix(A, layout.resized(n_coef))


@dataclass
class TruthReport:
    """Outcome of :func:`validate_truth`."""

    classes: list
    budget_usage: np.ndarray
    budget_ok: bool
    pattern_ok: bool
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return self.budget_ok and self.pattern_ok


def _classify(row, tol=0.0):
    if np.all(np.abs(row) <= tol):
        return "zero"
    if np.all(np.abs(row[1:]) <= tol):
        return "constant"
    return "varying"


def validate_truth(A, spec, rtol=1e-12):
    """Check the A0 sparsity pattern and A3 budget of every row; never raises.

    Budget usage is sum_k |a_jk|^nu (k+1)^(nu r') / C_a^nu for varying rows and
    |a_j0| / C_a for constant or zero rows.
    """
    entries = np.atleast_2d(A.entries)
    classes = [_classify(row) for row in entries]
    usage = np.zeros(entries.shape[0])
    violations = []
    if entries.shape[0] != spec.p:
        violations.append(f"matrix has {entries.shape[0]} rows, spec has p={spec.p}")
        return TruthReport(classes, usage, False, False, violations)

    budget_ok = True
    for j, row in enumerate(entries):
        if j in spec.varying_indices:
            nu, r = spec.smoothness(j)
            usage[j] = a3_budget(row, nu, r) / spec.C_a ** nu
        else:
            # r_j = infinity: only a_{j0} may be nonzero, with |a_j0| <= C_a
            usage[j] = abs(row[0]) / spec.C_a
            if classes[j] == "varying":
                usage[j] = np.inf
        if not usage[j] <= 1.0 + rtol:
            budget_ok = False
            violations.append(f"row {j}: A3 budget usage {usage[j]:.6g} exceeds 1")

    pattern_ok = True
    for j, cls in enumerate(classes):
        want = (
            "varying" if j in spec.varying_indices
            else "constant" if j in spec.constant_indices
            else "zero"
        )
        if cls != want:
            pattern_ok = False
            violations.append(f"row {j}: expected {want}, found {cls}")
    return TruthReport(classes, usage, budget_ok, pattern_ok, violations)


def write_coefficients_csv(A, path):
    """Write ``j,k,value`` rows (j 1-based covariate, k 0-based basis index)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "k", "value"])
        for j in range(A.p):
            for k in range(A.L_plus_1):
                w.writerow([j + 1, k, format(float(A.entries[j, k]), ".17g")])


def read_coefficients_csv(path, d=1):
    """Inverse of :func:`write_coefficients_csv`; ``d`` sets the block size."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["j", "k", "value"]:
            raise ValueError(f"{path}: expected header j,k,value")
        for rec in reader:
            rows.append((int(rec[0]), int(rec[1]), float(rec[2])))
    p = max(r[0] for r in rows)
    m = max(r[1] for r in rows) + 1
    entries = np.zeros((p, m))
    for j, k, v in rows:
        entries[j - 1, k] = v
    return CoefficientMatrix(entries, BlockLayout(m, d))
