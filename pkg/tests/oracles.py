"""Independent reference computations used by the test-suite.

Nothing here calls the solver or design code of the package; only the basis
evaluation (tested on its own) is shared.
"""
import math

import numpy as np


def haar_psi(x):
    x = np.asarray(x, dtype=float)
    return np.where((x >= 0) & (x < 0.5), 1.0, np.where((x >= 0.5) & (x < 1), -1.0, 0.0))


def fourier_by_hand(t, L_plus_1):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    cols = [np.ones_like(t)]
    for k in range(1, L_plus_1):
        m = (k + 1) // 2
        f = np.sin if k % 2 == 1 else np.cos
        cols.append(math.sqrt(2.0) * f(2 * math.pi * m * t))
    return np.stack(cols, axis=-1)


def haar_by_hand(t, L_plus_1):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    cols = [np.ones_like(t)]
    for j in range(1, L_plus_1):
        h = int(math.floor(math.log2(j)))
        i = j - 2 ** h
        cols.append(2 ** (h / 2) * haar_psi(2 ** h * (t % 1.0) - i))
    return np.stack(cols, axis=-1)


def midpoint_grid(m):
    return (np.arange(m) + 0.5) / m


def explicit_design(W, Phi):
    """B with row i = vec(phi(t_i) W_i^T), column j*(L+1)+k, built entrywise."""
    p, n = W.shape
    m = Phi.shape[1]
    B = np.empty((n, p * m))
    for i in range(n):
        for j in range(p):
            for k in range(m):
                B[i, j * m + k] = Phi[i, k] * W[j, i]
    return B


def group_index(p, starts, L_plus_1):
    """Flat column indices of every block (j, l) in vec order."""
    edges = list(starts) + [L_plus_1]
    return [np.arange(j * L_plus_1 + edges[l], j * L_plus_1 + edges[l + 1])
            for j in range(p) for l in range(len(starts))]


def block_penalty(a, groups):
    return sum(float(np.linalg.norm(a[g])) for g in groups)


def objective(B, Y, a, groups, delta):
    r = Y - B @ a
    return float(r @ r) / len(Y) + delta * block_penalty(a, groups)


def kkt(B, Y, a, groups, delta):
    """Maximum block-subgradient violation of n^-1||Y-Ba||^2 + delta sum ||a_g||."""
    g = -2.0 * B.T @ (Y - B @ a) / len(Y)
    worst = 0.0
    for G in groups:
        na = np.linalg.norm(a[G])
        if na > 0:
            v = np.linalg.norm(g[G] + delta * a[G] / na)
        else:
            v = max(0.0, np.linalg.norm(g[G]) - delta)
        worst = max(worst, v)
    return worst


def _prox(X, groups, tau):
    # groups are contiguous and ordered, so block sums reduce to reduceat
    first = np.array([G[0] for G in groups])
    sizes = np.array([len(G) for G in groups])
    nrm = np.sqrt(np.add.reduceat(X ** 2, first, axis=0))
    scale = np.where(nrm > tau, 1.0 - tau / np.where(nrm > 0, nrm, 1.0), 0.0)
    return X * np.repeat(scale, sizes, axis=0)


def ista(B, Y, groups, delta, starts=5, ridge=0.0, max_iter=10 ** 6, tol=1e-14, seed=0, x0=None):
    """Plain proximal gradient from several random starts, all run side by side.

    Minimises n^-1||Y-Ba||^2 + ridge ||a||^2 + delta sum_g ||a_g||.  Returns the
    best point and its objective.
    """
    n, m = B.shape
    H = 2.0 * B.T @ B / n + 2.0 * ridge * np.eye(m)
    c = 2.0 * B.T @ Y / n
    step = 1.0 / np.linalg.eigvalsh(H)[-1]
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, starts))
    X[:, 0] = 0.0 if x0 is None else x0
    for _ in range(max_iter):
        Xn = _prox(X - step * (H @ X - c[:, None]), groups, step * delta)
        if np.max(np.abs(Xn - X)) <= tol * (1 + np.max(np.abs(X))):
            X = Xn
            break
        X = Xn
    vals = [objective(B, Y, X[:, k], groups, delta) + ridge * float(X[:, k] @ X[:, k]) for k in range(starts)]
    k = int(np.argmin(vals))
    return X[:, k], vals[k]


def ridge_bisection(B, Y, groups, delta, radius, iters=60):
    """Ball-constrained block LASSO through its Lagrangian.

    The penalised solution a(lam) of objective + lam ||a||^2 has norm
    decreasing in lam; bisection finds ||a(lam)|| = radius.
    """
    a, _ = ista(B, Y, groups, delta, starts=1)
    if np.linalg.norm(a) <= radius:
        return a, objective(B, Y, a, groups, delta)
    lo, hi = 0.0, 1.0
    a_hi = ista(B, Y, groups, delta, starts=1, ridge=hi, x0=a)[0]
    while np.linalg.norm(a_hi) > radius:
        lo, hi = hi, 4.0 * hi
        a_hi = ista(B, Y, groups, delta, starts=1, ridge=hi, x0=a_hi)[0]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        a_mid = ista(B, Y, groups, delta, starts=1, ridge=mid, x0=a_hi)[0]
        if np.linalg.norm(a_mid) > radius:
            lo = mid
        else:
            hi, a_hi = mid, a_mid
        if hi - lo <= 1e-13 * hi:
            break
    return a_hi, objective(B, Y, a_hi, groups, delta)


def dykstra(v, groups, tau, radius, iters=500):
    """Prox of tau*sum||.|| + ball indicator by Dykstra's alternating projections."""
    x = v.copy()
    p = np.zeros_like(v)
    q = np.zeros_like(v)
    for _ in range(iters):
        y = _prox((x + p)[:, None], groups, tau)[:, 0]
        p = x + p - y
        z = y + q
        nz = np.linalg.norm(z)
        x_new = z if nz <= radius else z * (radius / nz)
        q = y + q - x_new
        x = x_new
    return x
