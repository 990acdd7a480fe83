"""Closed-form risk bounds and inequality audits for coefficient sequences.

All evaluators are pure functions of a :class:`TheoryBounds` record.  The
generic constants of the upper bounds are exposed as ``C_const`` and ``C_B``
(default 1); the bounds are meant for scaling comparisons, not absolute
values.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .basis import basis_matrix
from .model import a3_budget

__all__ = [
    "TheoryBounds",
    "delta_lower",
    "delta_upper",
    "delta_upper_simplified",
    "delta_theorem2",
    "n_low",
    "n_low_value",
    "n_restricted",
    "n_min_upper",
    "mu_feasible",
    "error_ratio_regime",
    "block_error_bound_audit",
    "tail_bound_audit",
    "uniform_bound_audit",
    "AuditResult",
]


@dataclass(frozen=True)
class TheoryBounds:
    """Inputs of the bound formulas.

    ``r`` and ``nu`` list the smoothness of the s time-varying components;
    ``omega_min_s``/``omega_max_s`` are the restricted eigenvalues of Omega at
    sparsity (s + s0)(1 + log n).
    """

    s0: int
    n: float
    p: float
    sigma: float
    r: tuple = ()
    nu: tuple = ()
    C_a: float = 1.0
    kappa: float = 0.1
    omega_min_s: float = 1.0
    omega_max_s: float = 1.0
    phi_min: float = 1.0
    phi_max: float = 1.0
    mu: float = 2.0
    h: float = 0.5
    K: float = 1.0
    C_omega: float = 1.0
    C_const: float = 1.0
    C_B: float = 1.0

    def __post_init__(self):
        r = tuple(float(x) for x in np.atleast_1d(self.r)) if len(np.atleast_1d(self.r)) else ()
        nu = np.atleast_1d(self.nu) if len(np.atleast_1d(self.nu)) else np.full(len(r), 2.0)
        if nu.size == 1 and len(r) > 1:
            nu = np.full(len(r), float(nu[0]))
        if len(nu) != len(r):
            raise ValueError("nu must match r in length")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "nu", tuple(float(x) for x in nu))
        for name in ("n", "p", "C_a", "omega_min_s", "omega_max_s", "phi_min", "phi_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.sigma < 0 or self.s0 < 0:
            raise ValueError("sigma and s0 must be nonnegative")

    @property
    def s(self):
        return len(self.r)


def _varying_sum(b, scale, log_p_power=False):
    total = 0.0
    for r in b.r:
        g = 2.0 * r / (2.0 * r + 1.0)
        term = b.C_a ** (2.0 / (2.0 * r + 1.0)) * scale ** g
        if log_p_power:
            term *= math.log(b.p) ** g
        total += term
    return total


def delta_lower(b):
    """Minimax lower bound: max of the constant-part and varying-part terms."""
    if not 0 < b.kappa < 0.125:
        raise ValueError("kappa must lie in (0, 1/8)")
    denom = b.n * b.omega_max_s * b.phi_max
    const = b.kappa * b.sigma ** 2 * b.s0 / (4.0 * denom)
    varying = _varying_sum(b, b.sigma ** 2 * b.kappa / denom) / 8.0
    return max(const, varying)


def delta_upper_simplified(b):
    """Upper bound rate with the absolute constant ``C_const``."""
    om_ratio = b.omega_max_s / b.omega_min_s
    const = b.sigma ** 2 * b.s0 * math.log(b.p) / (b.n * b.omega_min_s)
    varying = _varying_sum(b, b.sigma ** 2 / (b.n * b.omega_min_s), log_p_power=True)
    return b.C_const * om_ratio * (const + varying)


delta_upper = delta_upper_simplified


def delta_theorem2(b):
    """High-probability risk bound including the (log n) factors and the C_B constant."""
    lam = (1.0 - b.h) * b.omega_min_s * b.phi_min
    lead = b.C_omega * b.sigma ** 2 * b.K ** 2 * b.mu + 1.0
    cond = b.C_B * (1.0 + b.h) * b.omega_max_s * b.phi_max / lam
    log_p, log_n = math.log(b.p), math.log(b.n)
    inner = lead * (b.s0 + b.s) * log_p / (b.n * lam)
    for r, nu in zip(b.r, b.nu):
        g = 2.0 * r / (2.0 * r + 1.0)
        log_n_pow = (max(2.0 - nu, 0.0) - 2.0 * nu * r) / (nu * (2.0 * r + 1.0))
        inner += (
            b.C_a ** (2.0 / (2.0 * r + 1.0))
            * (lead / (b.n * lam)) ** g
            * log_n ** log_n_pow
            * log_p ** g
        )
    return b.C_a ** 2 * b.s / b.n ** 2 + cond * inner


def n_low_value(sigma, kappa, C_a, omega_max_s, phi_max, s, r_max):
    """(2 sigma^2 kappa / (C_a^2 omega_max phi_max)) * max(1, (6/s)^(2 r_max + 1))."""
    if s < 1:
        raise ValueError("n_low needs s >= 1")
    return (2.0 * sigma ** 2 * kappa / (C_a ** 2 * omega_max_s * phi_max)) * max(
        1.0, (6.0 / s) ** (2.0 * r_max + 1.0)
    )


def n_low(b, r_max=None):
    r_max = max(b.r) if r_max is None else r_max
    return n_low_value(b.sigma, b.kappa, b.C_a, b.omega_max_s, b.phi_max, b.s, r_max)


def n_restricted(aleph, L, mu, p, C_phi, U_mu_sq, phi_min, phi_max, omega_min, omega_max, h):
    """Sample size N(aleph) above which restricted Gram eigenvalues concentrate."""
    return (
        64.0 * mu * aleph * (L + 1) * math.log(p + L) * C_phi ** 2 * U_mu_sq * phi_max * omega_max
        / (h ** 2 * phi_min ** 2 * omega_min ** 2)
    )


def n_min_upper(b, L, U_mu_sq, C_phi, V=None, g2=1.0, omega_max_small=None):
    """Three-way maximum defining the sample size needed by the upper bound.

    ``omega_max_small`` is omega_max(s) and defaults to ``omega_max_s``.  ``V``
    is accepted for symmetry with :func:`mu_feasible` and is unused here.
    """
    om_s = b.omega_max_s if omega_max_small is None else omega_max_small
    ss = b.s + b.s0
    first = (
        64.0 * b.mu * ss * C_phi ** 2 * U_mu_sq * (L + 1) * b.phi_max * b.omega_max_s
        * math.log(b.p + L)
        / (b.h ** 2 * b.phi_min ** 2 * b.omega_min_s ** 2)
    )
    second = U_mu_sq * C_phi ** 2 * (L + 1) * b.mu * math.log(b.p) / (g2 * om_s)
    third = 3.0 * b.C_a ** 2 * g2 * b.s * om_s
    return max(first, second, third)


def mu_feasible(b, L, U_mu_sq, V):
    """True when p^mu exceeds every term the confidence exponent must dominate."""
    n = b.n
    need = max(
        math.sqrt(2.0 * V) * n / (8.0 * b.mu * math.sqrt(b.s + b.s0) * U_mu_sq * math.log(b.p + L)),
        2.0 * L / math.log(n),
        2.0 * n,
    )
    return b.mu * math.log(b.p) >= math.log(need)


def error_ratio_regime(b):
    """Regime of the upper/lower bound ratio for common (r, nu).

    Returns ``(name, factor)`` with name one of ``"log p"``,
    ``"log p ^ 2r/(2r+1)"`` or ``"constant"`` and the matching growth factor.
    """
    if b.s == 0 or b.s0 == 0:
        raise ValueError("regimes need s >= 1 and s0 >= 1")
    if len(set(b.r)) != 1 or len(set(b.nu)) != 1:
        raise ValueError("regimes need a common r and nu")
    r, nu = b.r[0], b.nu[0]
    log_p = math.log(b.p)
    if b.sigma ** 2 * (b.s / b.s0) ** (2.0 * r + 1.0) >= b.n * b.omega_min_s:
        return "log p", log_p
    if nu < 2:
        return "log p ^ 2r/(2r+1)", log_p ** (2.0 * r / (2.0 * r + 1.0))
    return "constant", 1.0


@dataclass
class AuditResult:
    lhs: float
    rhs: float
    passed: bool
    details: dict = field(default_factory=dict)

    @property
    def ratio(self):
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)


def _check_a3(coeffs, r, nu, C_a):
    if not nu >= 1 or not r > min(0.5, 1.0 / nu):
        raise ValueError("need nu >= 1 and r > min(1/2, 1/nu)")
    used = a3_budget(coeffs, nu, r)
    if used > C_a ** nu * (1.0 + 1e-12):
        raise ValueError(f"coefficients violate the A3 budget ({used:.6g} > {C_a ** nu:.6g})")


def _r_star(r, nu):
    return min(r, r + 0.5 - 1.0 / nu)


def block_error_bound_audit(coeffs, d, eps, r, nu, C_a):
    """Compare sum_l min(||a_l||^2, eps d) with C_a^(2/(2r+1)) eps^(2r/(2r+1)) d^((2-nu)+/(nu(2r+1))).

    Blocks are a_l = (a_{(l-1)d+1}, ..., a_{ld}), l >= 1, i.e. the coefficient
    a_0 of the constant function is not part of any block.
    """
    a = np.asarray(coeffs, dtype=float)
    _check_a3(a, r, nu, C_a)
    tail = a[1:]
    if tail.size:
        starts = np.arange(0, tail.size, d)
        blocks = np.add.reduceat(tail ** 2, starts)
        lhs = float(np.sum(np.minimum(blocks, eps * d)))
    else:
        lhs = 0.0
    g = 2.0 * r / (2.0 * r + 1.0)
    rhs = C_a ** (2.0 / (2.0 * r + 1.0)) * eps ** g * d ** (max(2.0 - nu, 0.0) / (nu * (2.0 * r + 1.0)))
    return AuditResult(lhs, rhs, lhs <= rhs)


def tail_bound_audit(coeffs, J, r, nu, C_a):
    """Compare sum_{k>J} a_k^2 with C_a^2 (J+1)^(-2 r*), r* = min(r, r')."""
    a = np.asarray(coeffs, dtype=float)
    _check_a3(a, r, nu, C_a)
    if J < 1:
        raise ValueError("J must be at least 1")
    lhs = float(np.sum(a[J + 1:] ** 2))
    rhs = C_a ** 2 * (J + 1.0) ** (-2.0 * _r_star(r, nu))
    return AuditResult(lhs, rhs, lhs <= rhs)


def uniform_bound_audit(coeffs, spec, J, r, nu, C_a, grid_size=10000):
    """Compare max_t |sum_{k>J} a_k phi_k(t)| with C_a C_phi (J+1)^-(r* - 1/2).

    The truncation keeps a_1..a_J; the constant coefficient a_0 is excluded
    from both f and f_J.  Requires r' >= 2.
    """
    a = np.asarray(coeffs, dtype=float)
    _check_a3(a, r, nu, C_a)
    if r + 0.5 - 1.0 / nu < 2:
        raise ValueError("uniform bound audit requires r' >= 2")
    if a.size != spec.L_plus_1:
        raise ValueError("coefficient length must match the basis size")
    t = np.linspace(0.0, 1.0, grid_size)
    rem = a.copy()
    rem[: J + 1] = 0.0
    lhs = float(np.max(np.abs(basis_matrix(spec, t) @ rem)))
    rhs = C_a * spec.c_phi * (J + 1.0) ** (-(_r_star(r, nu) - 0.5))
    return AuditResult(lhs, rhs, lhs <= rhs)
