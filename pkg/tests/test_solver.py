import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsevcm.basis import BasisSpec, basis_matrix
from sparsevcm.design import Dataset
from sparsevcm.model import BlockLayout, CoefficientMatrix
from sparsevcm.solver import (
    PenaltyConfig,
    SolverSettings,
    block_prox,
    delta_hat,
    estimate_omega_max_1,
    fit,
    fit_constrained,
    kkt_residual,
    objective,
    write_fit,
)
from sparsevcm.synth import DictionarySpec, sample_dictionary

import oracles


def _instance(seed, p, L_plus_1, n, d=2, kind="fourier", coef_scale=1.0, noise=0.3):
    rng = np.random.default_rng(seed)
    W = rng.normal(size=(p, n))
    t = rng.uniform(size=n)
    spec = BasisSpec(kind, L_plus_1)
    lay = BlockLayout(L_plus_1, d)
    B = oracles.explicit_design(W, basis_matrix(spec, t))
    A0 = rng.normal(size=(p, L_plus_1)) * coef_scale
    A0[rng.uniform(size=p) < 0.4] = 0.0
    Y = B @ A0.ravel() + noise * rng.normal(size=n)
    return Dataset(W, t, Y, noise), spec, lay, B, oracles.group_index(p, lay.starts, L_plus_1)


def test_delta_hat_example():
    cfg = PenaltyConfig(sigma=1, n=100, p=math.exp(4), K=1, mu=1, h=0, C_omega=1, phi_max=1, omega_max_1=1)
    assert delta_hat(cfg) == pytest.approx(0.8, rel=1e-14)


def test_delta_hat_scalings():
    base = dict(sigma=1.0, n=400, p=50, mu=1.0)
    d = delta_hat(PenaltyConfig(**base))
    assert delta_hat(PenaltyConfig(**{**base, "n": 1600})) == pytest.approx(d / 2, rel=1e-14)
    assert delta_hat(PenaltyConfig(**{**base, "sigma": 2.0})) == pytest.approx(d * 3 / 2, rel=1e-14)
    with pytest.raises(ValueError):
        delta_hat(PenaltyConfig(sigma=1.0, n=10, p=1))


def test_penalty_config_validation():
    with pytest.raises(ValueError):
        PenaltyConfig(sigma=1.0, n=10, p=5, h=1.0)
    with pytest.raises(ValueError):
        PenaltyConfig(sigma=1.0, n=10, p=5, mu=0.5)
    with pytest.raises(ValueError):
        PenaltyConfig(sigma=-1.0, n=10, p=5)


def test_estimate_omega_max_1():
    d = Dataset(np.ones((3, 10)), np.linspace(0, 1, 10), np.zeros(10), 1.0)
    assert estimate_omega_max_1(d) == 1.0
    W = sample_dictionary(DictionarySpec("bernoulli", 5), 30, 1)
    assert estimate_omega_max_1(Dataset(W, np.full(30, 0.5), np.zeros(30), 1.0)) == 1.0
    W = sample_dictionary(DictionarySpec("gaussian", 20), 10 ** 4, 2)
    assert 0.9 <= estimate_omega_max_1(Dataset(W, np.full(10 ** 4, 0.5), np.zeros(10 ** 4), 1.0)) <= 1.15


def test_block_prox_examples():
    np.testing.assert_allclose(block_prox([3.0, 4.0], 2.0), [1.8, 2.4], rtol=1e-15)
    assert np.all(block_prox([0.3, -0.4], 0.5) == 0)
    np.testing.assert_array_equal(block_prox([1.0, -2.0], 0.0), [1.0, -2.0])
    assert block_prox([-3.0], 1.0)[0] == -2.0
    with pytest.raises(ValueError):
        block_prox([1.0], -1.0)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=6), st.floats(0, 50))
@settings(max_examples=100, deadline=None)
def test_block_prox_optimality(v, tau):
    # x = prox(v) iff v - x is in tau * subdifferential of ||.|| at x
    v = np.array(v)
    x = block_prox(v, tau)
    g = v - x
    nx = np.linalg.norm(x)
    if nx > 0:
        np.testing.assert_allclose(g, tau * x / nx, atol=1e-9 * (1 + np.abs(v).max()))
    else:
        assert np.linalg.norm(g) <= tau * (1 + 1e-12) + 1e-12


def test_zero_response_gives_zero():
    data, spec, lay, *_ = _instance(0, 3, 5, 40)
    zero = Dataset(data.W, data.times, np.zeros(data.n), 1.0)
    res = fit(zero, spec, lay, 0.1)
    assert np.all(res.A_hat.entries == 0) and res.converged


def test_full_shrinkage_threshold():
    data, spec, lay, B, groups = _instance(1, 3, 6, 50)
    g = B.T @ data.Y / data.n
    thr = 2.0 * max(np.linalg.norm(g[G]) for G in groups)
    assert np.all(fit(data, spec, lay, thr * 1.000001).A_hat.entries == 0)
    assert np.any(fit(data, spec, lay, thr * 0.99).A_hat.entries != 0)


def test_tiny_instance_against_long_ista_oracle():
    data, spec, lay, B, groups = _instance(2, 2, 4, 30, d=2)
    delta = 0.05
    res = fit(data, spec, lay, delta)
    _, f_star = oracles.ista(B, data.Y, groups, delta, starts=5, max_iter=10 ** 6)
    assert abs(oracles.objective(B, data.Y, res.A_hat.vec(), groups, delta) - f_star) <= 1e-8
    assert res.converged


@pytest.mark.parametrize("seed", range(8))
def test_kkt_certificate_and_monotone_trace(seed):
    rng = np.random.default_rng(100 + seed)
    p = int(rng.integers(1, 6))
    data, spec, lay, B, groups = _instance(seed, p, int(rng.integers(1, 10)), int(rng.integers(15, 60)),
                                           d=int(rng.integers(1, 4)), kind=["fourier", "haar"][seed % 2])
    delta = float(rng.uniform(0.01, 0.4))
    s = SolverSettings()
    res = fit(data, spec, lay, delta, s)
    a = res.A_hat.vec()
    assert res.converged
    assert res.kkt_residual <= 10 * s.rel_tol * (1 + np.linalg.norm(a))
    assert oracles.kkt(B, data.Y, a, groups, delta) == pytest.approx(res.kkt_residual, rel=1e-6, abs=1e-12)
    assert kkt_residual(data, spec, lay, res.A_hat, delta) == pytest.approx(res.kkt_residual, rel=1e-6, abs=1e-12)
    assert objective(data, spec, lay, res.A_hat, delta) == pytest.approx(oracles.objective(B, data.Y, a, groups, delta), rel=1e-12)
    tr = res.objective_trace
    assert np.all(np.diff(tr) <= 0)
    assert tr[-1] == pytest.approx(oracles.objective(B, data.Y, a, groups, delta), rel=1e-12)


def test_permutation_equivariance():
    data, spec, lay, *_ = _instance(5, 5, 7, 60)
    perm = np.array([3, 0, 4, 1, 2])
    res = fit(data, spec, lay, 0.08)
    pdata = Dataset(data.W[perm], data.times, data.Y, data.sigma)
    pres = fit(pdata, spec, lay, 0.08)
    assert np.max(np.abs(pres.A_hat.entries - res.A_hat.entries[perm])) <= 1e-10 * (1 + np.abs(res.A_hat.entries).max()) + 1e-7


def test_noiseless_recovery_as_delta_shrinks():
    data, spec, lay, B, _ = _instance(6, 3, 5, 200, noise=0.0, coef_scale=1.0)
    a0 = np.linalg.lstsq(B, data.Y, rcond=None)[0]
    errs = [np.linalg.norm(fit(data, spec, lay, dlt).A_hat.vec() - a0) for dlt in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3


def test_nonconvergence_is_flagged_not_raised():
    data, spec, lay, *_ = _instance(7, 4, 9, 40)
    res = fit(data, spec, lay, 1e-3, SolverSettings(max_iters=3, rel_tol=1e-14))
    assert not res.converged
    assert res.iterations <= 3 * 10 + 3


def test_warm_start_reaches_same_objective():
    data, spec, lay, B, groups = _instance(8, 3, 6, 50)
    res = fit(data, spec, lay, 0.05)
    warm = fit(data, spec, lay, 0.05, warm_start=res.A_hat)
    assert warm.objective_trace[-1] <= res.objective_trace[-1] + 1e-12


def test_constrained_inactive_matches_unconstrained():
    data, spec, lay, *_ = _instance(9, 4, 6, 50)
    a = fit(data, spec, lay, 0.05)
    b = fit_constrained(data, spec, lay, 0.05, 1e6)
    assert np.max(np.abs(a.A_hat.entries - b.A_hat.entries)) <= 1e-8


def test_constrained_tiny_ball():
    data, spec, lay, *_ = _instance(10, 3, 5, 40)
    res = fit_constrained(data, spec, lay, 0.05, 1e-8)
    assert np.linalg.norm(res.A_hat.vec()) <= math.sqrt(3) * 1e-8 * (1 + 1e-12)
    with pytest.raises(ValueError):
        fit_constrained(data, spec, lay, 0.05, 0.0)


@pytest.mark.parametrize("seed", range(3))
def test_constrained_against_ridge_bisection(seed):
    data, spec, lay, B, groups = _instance(20 + seed, 3, 6, 50, coef_scale=2.0)
    delta = 0.05
    un = fit(data, spec, lay, delta)
    C_f = 0.5 * np.linalg.norm(un.A_hat.vec()) / math.sqrt(3)
    res = fit_constrained(data, spec, lay, delta, C_f)
    a = res.A_hat.vec()
    assert a @ a <= 3 * C_f ** 2 + 1e-10
    assert abs(np.linalg.norm(a) - math.sqrt(3) * C_f) <= 1e-6
    _, f_or = oracles.ridge_bisection(B, data.Y, groups, delta, math.sqrt(3) * C_f)
    assert abs(oracles.objective(B, data.Y, a, groups, delta) - f_or) <= 1e-6
    assert res.converged


def test_ball_projection_after_shrinkage_equals_dykstra():
    # the closed-form prox of block norm + ball indicator agrees with an alternating scheme
    rng = np.random.default_rng(3)
    lay = BlockLayout(7, 3)
    groups = oracles.group_index(2, lay.starts, 7)
    for _ in range(20):
        v = rng.normal(size=14) * 3
        tau, radius = rng.uniform(0.1, 2), rng.uniform(0.2, 3)
        x = np.concatenate([block_prox(v[G], tau) for G in groups])
        nx = np.linalg.norm(x)
        closed = x if nx <= radius else x * radius / nx
        np.testing.assert_allclose(closed, oracles.dykstra(v, groups, tau, radius), atol=1e-9)


def test_write_fit(tmp_path):
    data, spec, lay, *_ = _instance(11, 2, 4, 30)
    res = fit(data, spec, lay, 0.1)
    coef, meta = write_fit(res, tmp_path / "out", seed=42, settings=SolverSettings(), extra={"basis": "fourier"})
    text = open(meta).read()
    for key in ("delta=", "iterations=", "kkt_residual=", "seed=42", "settings.rel_tol=", "basis=fourier"):
        assert key in text
    assert open(coef).readline().strip() == "j,k,value"
    assert not [f for f in (tmp_path / "out").iterdir() if f.name.endswith(".tmp")]
