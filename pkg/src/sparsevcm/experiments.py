"""Seeded Monte Carlo studies of the block-LASSO estimator.

A plan fixes the dictionary, truth pattern, noise and a grid of sample sizes.
For every n the truth is drawn once; each replicate redraws W, t and the noise
from its own stream, fits with the data-driven penalty and records the risk.
Streams are derived from ``(master_seed, n, replicate)`` so the result does
not depend on how replicates are scheduled.
"""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from ._io import atomic_write_text, csv_text
from .basis import BasisSpec
from .model import BlockLayout, TruthSpec, generate_truth, risk_split
from .solver import PenaltyConfig, SolverSettings, delta_hat, estimate_omega_max_1, fit
from .synth import DictionarySpec, NoiseSpec, generate_dataset, theoretical_ric
from .theory import TheoryBounds, delta_lower, delta_theorem2, delta_upper, n_low, n_min_upper

__all__ = [
    "PenaltyOverrides",
    "ExperimentPlan",
    "RunRecord",
    "ExperimentResult",
    "basis_size_for",
    "truth_seed",
    "replicate_seed",
    "run_replicate",
    "run_plan",
    "support_metrics",
    "slope_fit",
    "write_results_csv",
    "write_aggregate_csv",
    "bounds_rows",
    "write_bounds_csv",
    "RESULT_COLUMNS",
    "AGGREGATE_COLUMNS",
    "BOUNDS_COLUMNS",
]

RESULT_COLUMNS = (
    "n", "replicate", "seed", "risk", "risk_infit", "risk_tail", "precision",
    "recall", "zero_block_frac", "delta", "iters", "kkt", "converged",
)
AGGREGATE_COLUMNS = ("n", "median_risk", "q25", "q75", "slope_running")
BOUNDS_COLUMNS = ("n", "delta_lower", "delta_upper", "delta_theorem2", "n_low", "N")


@dataclass(frozen=True)
class PenaltyOverrides:
    """Penalty constants; the fitted delta is ``delta_multiplier`` times delta_hat."""

    mu: float = 2.0
    h: float = 0.5
    C_omega: float = 1.0
    phi_max: float = 1.0
    delta_multiplier: float = 1.0

    def __post_init__(self):
        if self.delta_multiplier < 0:
            raise ValueError("delta_multiplier must be nonnegative")


@dataclass(frozen=True)
class ExperimentPlan:
    name: str
    dictionary: DictionarySpec
    truth: TruthSpec
    noise: NoiseSpec
    sigma: float
    n_grid: tuple
    replicates: int
    master_seed: int
    penalty: PenaltyOverrides = PenaltyOverrides()
    solver: SolverSettings = SolverSettings()
    basis_kind: str = "fourier"
    L_plus_1: int = None  # None ties L + 1 = ceil(sqrt(n))
    time_epsilon: float = 0.0

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        if not grid:
            raise ValueError("n_grid must not be empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if grid[0] < 2:
            raise ValueError("sample sizes must be at least 2")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.dictionary.p != self.truth.p:
            raise ValueError(f"dictionary p={self.dictionary.p} differs from truth p={self.truth.p}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.L_plus_1 is not None and self.L_plus_1 < 1:
            raise ValueError("L_plus_1 must be positive")
        BasisSpec(self.basis_kind, 1)


@dataclass(frozen=True)
class RunRecord:
    n: int
    replicate: int
    seed: int
    risk: float
    risk_infit: float
    risk_tail: float
    precision: float
    recall: float
    zero_block_frac: float
    delta: float
    iters: int
    kkt: float
    converged: bool


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    rows: list
    median_risk: dict = field(default_factory=dict)
    q25: dict = field(default_factory=dict)
    q75: dict = field(default_factory=dict)
    slope: float = math.nan
    intercept: float = math.nan
    r_squared: float = math.nan
    theory_slope: float = math.nan
    n_nonconverged: int = 0

    def rows_at(self, n):
        return [r for r in self.rows if r.n == n]


def basis_size_for(n, plan=None):
    """L + 1 = ceil(sqrt(n)) unless the plan fixes it."""
    if plan is not None and plan.L_plus_1 is not None:
        return int(plan.L_plus_1)
    return math.isqrt(n - 1) + 1


def truth_seed(master_seed, n):
    return int(np.random.SeedSequence([master_seed, n, 0]).generate_state(1)[0])


def replicate_seed(master_seed, n, replicate):
    return int(np.random.SeedSequence([master_seed, n, replicate + 1]).generate_state(1)[0])


def support_metrics(A_hat, truth_spec):
    """(precision, recall, exact_zero_block_fraction) of the estimated pattern.

    Covariate j counts as selected when any entry of row j is nonzero.  Truly
    zero blocks are all blocks of covariates outside the support plus the
    blocks l >= 1 of constant covariates.
    """
    E = A_hat.entries
    if E.shape[0] != truth_spec.p:
        raise ValueError(f"A_hat has {E.shape[0]} rows, truth has p={truth_spec.p}")
    support = truth_spec.support
    selected = set(np.flatnonzero(np.any(E != 0, axis=1)).tolist())
    hits = len(selected & support)
    precision = hits / len(selected) if selected else 1.0
    recall = hits / len(support) if support else 1.0
    nz = np.add.reduceat(np.abs(E), A_hat.layout.starts, axis=1) != 0
    truly_zero = np.ones_like(nz)
    for j in truth_spec.varying_indices:
        truly_zero[j] = False
    for j in truth_spec.constant_indices:
        truly_zero[j, 0] = False
    total = int(truly_zero.sum())
    zero_frac = float(np.sum(truly_zero & ~nz) / total) if total else 1.0
    return precision, recall, zero_frac


def slope_fit(median_risks, n_grid):
    """Least-squares line through (log n, log risk); returns (slope, intercept, r^2)."""
    y = np.asarray(median_risks, dtype=float)
    x = np.asarray(n_grid, dtype=float)
    if y.shape != x.shape or y.size < 3:
        raise ValueError("slope_fit needs at least 3 matching points")
    if np.any(~(y > 0)) or np.any(~(x > 0)):
        raise ValueError("risks and sample sizes must be positive")
    lx, ly = np.log(x), np.log(y)
    X = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(X, ly, rcond=None)
    resid = ly - X @ np.array([slope, intercept])
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def _truth_for(plan, n):
    L_plus_1 = basis_size_for(n, plan)
    layout = BlockLayout.for_sample_size(L_plus_1, n)
    return layout, generate_truth(plan.truth, layout, truth_seed(plan.master_seed, n))


def run_replicate(plan, n, replicate, truth=None):
    """Single (n, replicate) cell of the plan."""
    with threadpool_limits(limits=1):
        if truth is None:
            layout, truth = _truth_for(plan, n)
        else:
            layout = BlockLayout.for_sample_size(basis_size_for(n, plan), n)
        spec = BasisSpec(plan.basis_kind, layout.L_plus_1)
        seed = replicate_seed(plan.master_seed, n, replicate)
        data = generate_dataset(
            truth, spec.kind, plan.dictionary, plan.noise, plan.sigma, n, seed, plan.time_epsilon
        )
        pen = plan.penalty
        cfg = PenaltyConfig(
            plan.sigma, n, plan.dictionary.p, K=plan.noise.K, mu=pen.mu, h=pen.h,
            C_omega=pen.C_omega, phi_max=pen.phi_max, omega_max_1=estimate_omega_max_1(data),
        )
        delta = pen.delta_multiplier * delta_hat(cfg)
        res = fit(data, spec, layout, delta, plan.solver)
        infit, tail = risk_split(res.A_hat, truth)
        prec, rec, zf = support_metrics(res.A_hat, plan.truth)
        return RunRecord(
            n, replicate, seed, infit + tail, infit, tail, prec, rec, zf,
            float(delta), int(res.iterations), float(res.kkt_residual), bool(res.converged),
        )


def _run_task(args):
    return run_replicate(*args)


def _aggregate(result):
    plan = result.plan
    pts_n, pts_r = [], []
    for n in plan.n_grid:
        risks = [r.risk for r in result.rows_at(n) if r.converged]
        if risks:
            result.median_risk[n] = float(np.median(risks))
            result.q25[n], result.q75[n] = (float(q) for q in np.quantile(risks, [0.25, 0.75]))
            pts_n.append(n)
            pts_r.append(result.median_risk[n])
        else:
            result.median_risk[n] = result.q25[n] = result.q75[n] = math.nan
    result.n_nonconverged = sum(not r.converged for r in result.rows)
    if len(pts_n) >= 3 and all(v > 0 for v in pts_r):
        result.slope, result.intercept, result.r_squared = slope_fit(pts_r, pts_n)
    rs = plan.truth.r
    result.theory_slope = -2.0 * min(rs) / (2.0 * min(rs) + 1.0) if rs else -1.0
    return result


def run_plan(plan, threads=1):
    """Run every (n, replicate) cell and aggregate converged rows.

    Rows come back in (n, replicate) order; with ``threads > 1`` the cells
    run in a process pool, each worker limited to one BLAS thread.
    """
    if threads < 1:
        raise ValueError("threads must be at least 1")
    cells = [(n, rep) for n in plan.n_grid for rep in range(plan.replicates)]
    if threads == 1:
        rows = []
        for n in plan.n_grid:
            _, truth = _truth_for(plan, n)
            rows.extend(run_replicate(plan, n, rep, truth) for rep in range(plan.replicates))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_task, [(plan, n, rep) for n, rep in cells], chunksize=1))
    return _aggregate(ExperimentResult(plan, rows))


def _fmt(x):
    return repr(float(x))


def write_results_csv(result, path):
    rows = [
        [r.n, r.replicate, r.seed, _fmt(r.risk), _fmt(r.risk_infit), _fmt(r.risk_tail),
         _fmt(r.precision), _fmt(r.recall), _fmt(r.zero_block_frac), _fmt(r.delta),
         r.iters, _fmt(r.kkt), int(r.converged)]
        for r in result.rows
    ]
    atomic_write_text(path, csv_text(RESULT_COLUMNS, rows))


def write_aggregate_csv(result, path):
    """Per-n median and quartiles; slope_running uses the grid points up to n."""
    rows = []
    pts_n, pts_r = [], []
    for n in result.plan.n_grid:
        med = result.median_risk.get(n, math.nan)
        if med > 0:
            pts_n.append(n)
            pts_r.append(med)
        slope = slope_fit(pts_r, pts_n)[0] if len(pts_n) >= 3 else math.nan
        rows.append([n, _fmt(med), _fmt(result.q25.get(n, math.nan)),
                     _fmt(result.q75.get(n, math.nan)), _fmt(slope)])
    atomic_write_text(path, csv_text(AGGREGATE_COLUMNS, rows))


def bounds_rows(plan, kappa=0.1, C_const=1.0, C_B=1.0, aleph_mu=None):
    """Theoretical bounds per grid point for the plan's synthetic dictionary.

    Restricted eigenvalues come from the closed forms of the dictionary at
    sparsity (s + s0)(1 + log n); the basis Gram is the identity, so
    phi_min = phi_max = 1.
    """
    t = plan.truth
    out = []
    for n in plan.n_grid:
        aleph = (t.s + t.s0) * (1.0 + math.log(n))
        om_min, om_max, C_mu, U_sq = theoretical_ric(plan.dictionary, aleph, plan.penalty.mu)
        b = TheoryBounds(
            s0=t.s0, n=n, p=t.p, sigma=plan.sigma, r=t.r, nu=t.nu, C_a=t.C_a, kappa=kappa,
            omega_min_s=om_min, omega_max_s=om_max, phi_min=1.0, phi_max=1.0,
            mu=plan.penalty.mu, h=plan.penalty.h, K=plan.noise.K, C_omega=plan.penalty.C_omega,
            C_const=C_const, C_B=C_B,
        )
        L = basis_size_for(n, plan) - 1
        c_phi = BasisSpec(plan.basis_kind, 1).c_phi
        lo = delta_lower(b) if (t.s or t.s0) else 0.0
        nl = n_low(b) if t.s else math.nan
        out.append((n, lo, delta_upper(b), delta_theorem2(b), nl, n_min_upper(b, L, U_sq, c_phi)))
    return out


def write_bounds_csv(rows, path):
    atomic_write_text(path, csv_text(BOUNDS_COLUMNS, [[r[0]] + [_fmt(x) for x in r[1:]] for r in rows]))
