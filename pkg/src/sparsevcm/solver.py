"""Block-LASSO estimator for the varying coefficient model.

Solves

    min_A  n^-1 ||Y - B vec(A)||^2 + delta * ||A||_block

by FISTA with backtracking and function-value restart, optionally subject to
||A||_F^2 <= p C_f^2.  The design B is never formed: products with B and B^T
are computed from the covariates W and the basis matrix Phi directly,

    B vec(A)  = rowsum(W^T * (Phi A^T)),      B^T r = (W * r) Phi,

which costs O(n p (L+1)) per product.  Covariates enter a working set only
when their zero blocks violate the optimality conditions, so the iterations
touch the active covariates only.
"""
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import basis_matrix
from .model import CoefficientMatrix, block_norms, write_coefficients_csv

__all__ = [
    "PenaltyConfig",
    "SolverSettings",
    "FitResult",
    "delta_hat",
    "estimate_omega_max_1",
    "block_prox",
    "objective",
    "kkt_residual",
    "fit",
    "fit_constrained",
    "write_fit",
]


@dataclass(frozen=True)
class PenaltyConfig:
    """Ingredients of the data-driven penalty level.

    ``K`` bounds the sub-Gaussian norm of the noise, ``mu`` is the confidence
    exponent, ``h`` the eigenvalue slack of the Gram concentration, ``C_omega``
    the conditioning constant, ``phi_max`` the top eigenvalue of E phi phi^T
    and ``omega_max_1`` the largest diagonal entry of E W W^T.
    """

    sigma: float
    n: int
    p: float
    K: float = 1.0
    mu: float = 2.0
    h: float = 0.5
    C_omega: float = 1.0
    phi_max: float = 1.0
    omega_max_1: float = 1.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        for name in ("K", "C_omega", "phi_max", "omega_max_1"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.mu < 1:
            raise ValueError("mu must be at least 1")
        if not 0 <= self.h < 1:
            raise ValueError("h must lie in [0, 1)")
        if self.n < 1:
            raise ValueError("n must be positive")


@dataclass(frozen=True)
class SolverSettings:
    max_iters: int = 5000
    rel_tol: float = 1e-8
    step_backtrack_factor: float = 0.5
    restart: bool = True
    check_every: int = 10
    power_iters: int = 20

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if not 0 < self.step_backtrack_factor < 1:
            raise ValueError("step_backtrack_factor must lie in (0, 1)")


@dataclass
class FitResult:
    A_hat: CoefficientMatrix
    objective_trace: np.ndarray
    iterations: int
    kkt_residual: float
    delta_used: float
    converged: bool
    radius: float = math.inf
    info: dict = field(default_factory=dict)


def delta_hat(cfg):
    """Penalty 2 (sigma C_omega K sqrt(mu) + 1) sqrt((1+h) phi_max omega_max(1) log p / n)."""
    if cfg.p < 2:
        raise ValueError("delta_hat needs p >= 2 so that log p > 0")
    lead = cfg.sigma * cfg.C_omega * cfg.K * math.sqrt(cfg.mu) + 1.0
    return 2.0 * lead * math.sqrt(
        (1.0 + cfg.h) * cfg.phi_max * cfg.omega_max_1 * math.log(cfg.p) / cfg.n
    )


def estimate_omega_max_1(data):
    """Largest diagonal entry of Omega_hat = n^-1 sum_i W_i W_i^T."""
    if data.n < 1:
        raise ValueError("dataset has no observations")
    return float(np.max(np.mean(data.W ** 2, axis=1)))


def block_prox(v, tau):
    """Proximal map of tau * ||.||_2 on a single block (group soft-thresholding)."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    v = np.asarray(v, dtype=float)
    nv = float(np.linalg.norm(v))
    if nv <= tau:
        return np.zeros_like(v)
    return v * (1.0 - tau / nv)


def _prox_blocks(X, tau, starts):
    """Group soft-thresholding of every block of every row of X."""
    norms = np.sqrt(np.add.reduceat(X * X, starts, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        shrink = np.where(norms > tau, 1.0 - tau / norms, 0.0)
    sizes = np.diff(np.append(starts, X.shape[1]))
    return X * np.repeat(shrink, sizes, axis=1)


def _ball(X, radius):
    if not math.isfinite(radius):
        return X
    nx = math.sqrt(float(np.sum(X * X)))
    return X * (radius / nx) if nx > radius else X


class _LeastSquares:
    """Matrix-free access to f(A) = n^-1 ||Y - B vec(A)||^2 for a subset of covariates."""

    def __init__(self, W, P, Y):
        self.W, self.P, self.Y = W, P, Y
        self.n = Y.size

    def matvec(self, A, rows):
        Wr = self.W[rows]
        return np.einsum("in,ni->n", Wr, self.P @ A.T, optimize=False)

    def rmatvec(self, r, rows):
        return (self.W[rows] * r) @ self.P

    def loss(self, BA):
        res = self.Y - BA
        return float(res @ res) / self.n

    def grad(self, BA, rows):
        return (2.0 / self.n) * self.rmatvec(BA - self.Y, rows)

    def lipschitz(self, rows, iters):
        """Power-iteration estimate of lambda_max(2 n^-1 B_S^T B_S)."""
        rng = np.random.default_rng(0)
        V = rng.standard_normal((len(rows), self.P.shape[1]))
        lam = 0.0
        for _ in range(iters):
            nv = np.linalg.norm(V)
            if nv == 0:
                return 0.0
            V /= nv
            U = (2.0 / self.n) * self.rmatvec(self.matvec(V, rows), rows)
            lam = float(np.sum(U * V))
            V = U
        return lam


def _kkt_blocks(G, A, delta, starts, radius):
    """Per-block optimality violation (see :func:`kkt_residual`)."""
    sizes = np.diff(np.append(starts, A.shape[1]))
    an = np.sqrt(np.add.reduceat(A * A, starts, axis=1))
    nz = an > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        U = np.where(np.repeat(nz, sizes, axis=1), A / np.repeat(an, sizes, axis=1), 0.0)
    R = G + delta * U
    lam = 0.0
    if math.isfinite(radius):
        na2 = float(np.sum(A * A))
        if na2 > 0 and na2 >= radius * radius * (1.0 - 1e-9):
            lam = max(0.0, -float(np.sum(R * A)) / (2.0 * na2))
    R = R + 2.0 * lam * A
    res_nz = np.sqrt(np.add.reduceat(R * R, starts, axis=1))
    gn = np.sqrt(np.add.reduceat(G * G, starts, axis=1))
    return np.where(nz, res_nz, np.maximum(0.0, gn - delta)), gn


def kkt_residual(data, spec, layout, A, delta, radius=math.inf):
    """Largest block violation of the optimality conditions at ``A``.

    With G = 2 n^-1 B^T (B a - Y) restricted to block b, the violation is
    ||G_b + delta a_b/||a_b|| + 2 lam a_b|| for nonzero blocks and
    max(0, ||G_b|| - delta) for zero blocks.  ``lam`` is the least-squares
    multiplier of an active norm constraint and zero otherwise.
    """
    entries = A.entries if isinstance(A, CoefficientMatrix) else np.asarray(A, float)
    ls = _LeastSquares(data.W, basis_matrix(spec, data.times), data.Y)
    rows = np.arange(data.p)
    G = ls.grad(ls.matvec(entries, rows), rows)
    v, _ = _kkt_blocks(G, entries, delta, layout.starts, radius)
    return float(v.max())


def objective(data, spec, layout, A, delta):
    """n^-1 ||Y - B a||^2 + delta ||A||_block."""
    entries = A.entries if isinstance(A, CoefficientMatrix) else np.asarray(A, float)
    ls = _LeastSquares(data.W, basis_matrix(spec, data.times), data.Y)
    rows = np.arange(data.p)
    return ls.loss(ls.matvec(entries, rows)) + delta * float(block_norms(entries, layout).sum())


def _fista(ls, rows, X0, delta, starts, radius, settings, budget, ceiling):
    """FISTA on the covariates ``rows``; returns (X, trace, iterations, status)."""
    beta = settings.step_backtrack_factor
    X = X0.copy()
    BX = ls.matvec(X, rows)
    Fx = min(ls.loss(BX) + delta * _block_sum(X, starts), ceiling)
    lip = ls.lipschitz(rows, settings.power_iters)
    step = 1.0 / lip if lip > 0 else 1.0
    Y, BY, t = X, BX, 1.0
    momentum = False
    trace = []
    it = 0
    status = "max_iters"
    while it < budget:
        it += 1
        fy = ls.loss(BY)
        GY = ls.grad(BY, rows)
        while True:
            Z = _ball(_prox_blocks(Y - step * GY, step * delta, starts), radius)
            BZ = ls.matvec(Z, rows)
            fz = ls.loss(BZ)
            D = Z - Y
            quad = fy + float(np.sum(GY * D)) + float(np.sum(D * D)) / (2.0 * step)
            if fz <= quad + 1e-15 * max(1.0, abs(fy)) or step < 1e-30:
                break
            step *= beta
        Fz = fz + delta * _block_sum(Z, starts)
        if settings.restart and Fz > Fx:
            if not momentum:
                status = "stalled"
                break
            Y, BY, t, momentum = X, BX, 1.0, False
            continue
        Xp, BXp = X, BX
        X, BX, Fx = Z, BZ, Fz
        trace.append(Fx)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        w = (t - 1.0) / t_new
        Y = X + w * (X - Xp)
        BY = BX + w * (BX - BXp)
        t = t_new
        momentum = w > 0
        if it % settings.check_every == 0:
            viol, _ = _kkt_blocks(ls.grad(BX, rows), X, delta, starts, radius)
            if viol.max() <= _tol(settings, X):
                status = "converged"
                break
    return X, trace, it, status


def _block_sum(X, starts):
    return float(np.sqrt(np.add.reduceat(X * X, starts, axis=1)).sum())


def _tol(settings, X):
    return 10.0 * settings.rel_tol * (1.0 + float(np.linalg.norm(X)))


def _solve(data, spec, layout, delta, settings, radius, warm_start):
    if not (math.isfinite(delta) and delta >= 0):
        raise ValueError("delta must be a finite nonnegative number")
    if spec.L_plus_1 != layout.L_plus_1:
        raise ValueError("basis size and block layout disagree")
    settings = settings or SolverSettings()
    P = basis_matrix(spec, data.times)
    ls = _LeastSquares(data.W, P, data.Y)
    starts = layout.starts
    p, m = data.p, spec.L_plus_1
    if warm_start is None:
        A = np.zeros((p, m))
    else:
        A = np.array(getattr(warm_start, "entries", warm_start), dtype=float)
        if A.shape != (p, m):
            raise ValueError(f"warm start has shape {A.shape}, expected {(p, m)}")
    A = _ball(A, radius)
    every = np.arange(p)

    trace = [ls.loss(ls.matvec(A, every)) + delta * float(block_norms(A, layout).sum())]
    iters = 0
    status = "converged"
    rounds = 0
    while True:
        G = ls.grad(ls.matvec(A, every), every)
        viol, _ = _kkt_blocks(G, A, delta, starts, radius)
        tol = _tol(settings, A)
        active = np.any(A != 0, axis=1)
        if viol.max() <= tol:
            status = "converged"
            break
        if iters >= settings.max_iters:
            status = "max_iters"
            break
        rows = np.flatnonzero(active | (viol.max(axis=1) > tol))
        X, tr, it, st = _fista(
            ls, rows, A[rows], delta, starts, radius, settings,
            settings.max_iters - iters, trace[-1],
        )
        rounds += 1
        iters += it
        A[rows] = X
        trace.extend(tr)
        if st == "stalled" and not tr:
            viol, _ = _kkt_blocks(ls.grad(ls.matvec(A, every), every), A, delta, starts, radius)
            status = "converged" if viol.max() <= _tol(settings, A) else "stalled"
            break

    final_kkt = float(
        _kkt_blocks(ls.grad(ls.matvec(A, every), every), A, delta, starts, radius)[0].max()
    )
    converged = final_kkt <= _tol(settings, A)
    return FitResult(
        A_hat=CoefficientMatrix(A, layout),
        objective_trace=np.asarray(trace),
        iterations=iters,
        kkt_residual=final_kkt,
        delta_used=float(delta),
        converged=bool(converged),
        radius=float(radius),
        info={"status": status if not converged else "converged", "rounds": rounds},
    )


def fit(data, spec, layout, delta, settings=None, warm_start=None):
    """Block-LASSO fit; non-convergence is reported in ``FitResult.converged``."""
    return _solve(data, spec, layout, delta, settings, math.inf, warm_start)


def fit_constrained(data, spec, layout, delta, C_f, settings=None, warm_start=None):
    """Block-LASSO fit subject to ||a||_2^2 <= p C_f^2.

    The proximal map of the block norm plus the ball indicator is group
    soft-thresholding followed by radial projection onto the ball: scaling a
    point leaves the block-norm subdifferential unchanged, so the two maps
    compose exactly.
    """
    if not C_f > 0:
        raise ValueError("C_f must be positive")
    radius = math.sqrt(data.p) * C_f
    return _solve(data, spec, layout, delta, settings, radius, warm_start)


def write_fit(result, out_dir, seed=None, settings=None, extra=None):
    """Write ``coefficients.csv`` and a ``fit_meta.txt`` key=value sidecar."""
    os.makedirs(out_dir, exist_ok=True)
    coef_path = os.path.join(out_dir, "coefficients.csv")
    meta_path = os.path.join(out_dir, "fit_meta.txt")
    tmp = coef_path + ".tmp"
    write_coefficients_csv(result.A_hat, tmp)
    os.replace(tmp, coef_path)
    meta = {
        "delta": repr(result.delta_used),
        "iterations": str(result.iterations),
        "kkt_residual": repr(result.kkt_residual),
        "converged": str(result.converged),
        "seed": "" if seed is None else str(seed),
        "block_size": str(result.A_hat.layout.d),
    }
    if math.isfinite(result.radius):
        meta["radius"] = repr(result.radius)
    if settings is not None:
        for k, v in asdict(settings).items():
            meta[f"settings.{k}"] = str(v)
    for k, v in (extra or {}).items():
        meta[k] = str(v)
    tmp = meta_path + ".tmp"
    with open(tmp, "w") as fh:
        for k, v in meta.items():
            fh.write(f"{k}={v}\n")
    os.replace(tmp, meta_path)
    return coef_path, meta_path
