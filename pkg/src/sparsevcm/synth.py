"""Synthetic designs, noise and data for the varying coefficient model.

Also builds the family of well-separated test functions used for minimax
lower bounds: constant components of height u on one index set, varying
components with coefficients v on a dyadic-like band [l0, 2 l0 - 1] on
another, switched on and off by binary sequences from a greedy packing.
"""
import math
from dataclasses import dataclass

import numpy as np

from .basis import BasisSpec, basis_matrix
from .design import Dataset
from .model import BlockLayout, CoefficientMatrix, TruthSpec

__all__ = [
    "DictionarySpec",
    "NoiseSpec",
    "TestFunctionFamily",
    "sample_dictionary",
    "sample_noise",
    "sample_times",
    "theoretical_ric",
    "generate_dataset",
    "greedy_packing",
    "test_coefficient_v",
    "band_start",
    "build_test_family",
    "total_distance",
]

DICTIONARIES = ("gaussian", "bernoulli", "canonical")
_DICT_ALIASES = {
    "symmetricbernoulli": "bernoulli",
    "symmetric_bernoulli": "bernoulli",
    "orthonormalcanonical": "canonical",
    "orthonormal_canonical": "canonical",
    "orthonormal": "canonical",
}


@dataclass(frozen=True)
class DictionarySpec:
    """Distribution of the covariate vectors W_i."""

    kind: str
    p: int

    def __post_init__(self):
        kind = str(self.kind).lower()
        kind = _DICT_ALIASES.get(kind, kind)
        if kind not in DICTIONARIES:
            raise ValueError(f"unknown dictionary kind {self.kind!r}; expected one of {DICTIONARIES}")
        if self.p < 1:
            raise ValueError("p must be at least 1")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "p", int(self.p))


@dataclass(frozen=True)
class NoiseSpec:
    """Centred unit-variance noise; ``K`` is the sub-Gaussian norm bound used in penalties."""

    kind: str = "gaussian"
    K: float = 1.0

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in ("gaussian", "rademacher"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)


def sample_dictionary(spec, n, rng_seed):
    """Draw the p x n matrix with columns W_1..W_n."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(rng_seed)
    if spec.kind == "gaussian":
        return rng.standard_normal((spec.p, n))
    if spec.kind == "bernoulli":
        return rng.choice([-1.0, 1.0], size=(spec.p, n))
    W = np.zeros((spec.p, n))
    W[rng.integers(0, spec.p, size=n), np.arange(n)] = 1.0
    return W


def sample_noise(spec, n, rng):
    if spec.kind == "gaussian":
        return rng.standard_normal(n)
    return rng.choice([-1.0, 1.0], size=n)


def sample_times(n, rng, epsilon=0.0):
    """Sampling times on [0, 1] with density 1 + epsilon cos(2 pi t), |epsilon| < 1.

    The perturbed density is drawn by rejection against the uniform.
    """
    if not abs(epsilon) < 1:
        raise ValueError("|epsilon| must be below 1 for a density bounded away from zero")
    if epsilon == 0:
        return rng.uniform(0.0, 1.0, size=n)
    out = np.empty(0)
    while out.size < n:
        t = rng.uniform(0.0, 1.0, size=2 * (n - out.size) + 8)
        u = rng.uniform(0.0, 1.0 + abs(epsilon), size=t.size)
        out = np.concatenate((out, t[u <= 1.0 + epsilon * np.cos(2 * np.pi * t)]))
    return out[:n]


def theoretical_ric(spec, aleph, mu, log_p=None):
    """Closed-form (omega_min, omega_max, C_mu, U_mu^2) for the built-in dictionaries.

    Gaussian: Omega = I, C_mu = sqrt(2 log p), U_mu^2 = (sqrt(aleph) + 2 sqrt(mu log p))^2.
    Bernoulli: Omega = I, C_mu = 1, U_mu^2 = aleph.
    Canonical: Omega = I/p, C_mu = 1, U_mu^2 = 1.
    """
    log_p = math.log(spec.p) if log_p is None else float(log_p)
    if spec.kind == "gaussian":
        return 1.0, 1.0, math.sqrt(2.0 * log_p), (math.sqrt(aleph) + 2.0 * math.sqrt(mu * log_p)) ** 2
    if spec.kind == "bernoulli":
        return 1.0, 1.0, 1.0, float(aleph)
    if spec.kind == "canonical":
        return 1.0 / spec.p, 1.0 / spec.p, 1.0, 1.0
    raise ValueError(f"unsupported dictionary {spec.kind!r}")


def generate_dataset(truth, basis_kind, dictionary, noise, sigma, n, rng_seed, time_epsilon=0.0):
    """Draw (W_i, t_i, Y_i) with Y_i = W_i^T f(t_i) + sigma xi_i.

    ``f`` is evaluated from every column of ``truth``, so coefficients beyond
    the estimation basis enter the responses as the remainder term.
    """
    if truth.p != dictionary.p:
        raise ValueError(f"truth has p={truth.p}, dictionary has p={dictionary.p}")
    kind = basis_kind.kind if isinstance(basis_kind, BasisSpec) else basis_kind
    ss_w, ss_t, ss_e = np.random.SeedSequence(rng_seed).spawn(3)
    W = sample_dictionary(dictionary, n, ss_w)
    times = sample_times(n, np.random.default_rng(ss_t), time_epsilon)
    xi = sample_noise(noise, n, np.random.default_rng(ss_e))
    F = basis_matrix(BasisSpec(kind, truth.L_plus_1), times) @ truth.entries.T  # n x p
    Y = np.einsum("ni,in->n", F, W) + sigma * xi
    return Dataset(W, times, Y, sigma)


def greedy_packing(length, rng_seed, size=None, max_size=128, max_tries=200000):
    """Binary sequences with pairwise Hamming distance >= ceil(length / 8).

    The all-zero sequence comes first; random candidates are accepted when far
    enough from every accepted one.  The target size is
    min(2**length, max(3, min(max_size, floor(2**(length/8)) + 1))) unless
    ``size`` is given.
    """
    if length < 1:
        raise ValueError("length must be positive")
    min_dist = -(-length // 8)
    if size is None:
        vg = math.floor(2.0 ** (length / 8.0)) + 1 if length < 8 * 60 else max_size
        size = max(3, min(max_size, vg))
    size = min(size, 2 ** min(length, 62))
    rng = np.random.default_rng(rng_seed)
    words = [np.zeros(length, dtype=np.int8)]
    tries = 0
    while len(words) < size and tries < max_tries:
        tries += 1
        cand = rng.integers(0, 2, size=length, dtype=np.int8)
        stack = np.asarray(words)
        if np.all(np.sum(stack != cand, axis=1) >= min_dist):
            words.append(cand)
    return np.asarray(words)


def test_coefficient_v(C_a, l0, r):
    """v = C_a (2 l0)^-(r + 1/2)."""
    return C_a * (2.0 * l0) ** (-(r + 0.5))


def band_start(C_a, n, omega_max_s, phi_max, sigma, kappa, r):
    """l0 = floor(0.5 (4 C_a^2 n omega_max phi_max / (sigma^2 kappa))^(1/(2r+1))) + 1."""
    base = 4.0 * C_a ** 2 * n * omega_max_s * phi_max / (sigma ** 2 * kappa)
    return int(math.floor(0.5 * base ** (1.0 / (2.0 * r + 1.0)))) + 1


@dataclass
class TestFunctionFamily:
    """Test functions f_omega indexed by rows of ``omegas``.

    Bit layout of each omega: one bit per index in ``K1`` (constant part,
    height ``u``), then for every k in ``K0`` the bits for basis indices
    l0_k .. 2 l0_k - 1 (coefficient ``v``).
    """

    __test__ = False

    p: int
    u: float
    v: float
    l0: tuple
    K0: tuple
    K1: tuple
    r: tuple
    omegas: np.ndarray
    n_low: float

    @property
    def length(self):
        return len(self.K1) + int(sum(self.l0))

    @property
    def L_plus_1(self):
        return max([2 * l for l in self.l0] + [1])

    def coefficients(self, omega, d=1):
        omega = np.asarray(omega)
        if omega.size != self.length:
            raise ValueError(f"omega must have {self.length} bits")
        A = np.zeros((self.p, self.L_plus_1))
        pos = 0
        for k in self.K1:
            A[k, 0] = omega[pos] * self.u
            pos += 1
        for k, l0 in zip(self.K0, self.l0):
            A[k, l0:2 * l0] = omega[pos:pos + l0] * self.v
            pos += l0
        return CoefficientMatrix(A, BlockLayout(self.L_plus_1, d))

    def all_coefficients(self, d=1):
        return [self.coefficients(w, d) for w in self.omegas]

    def truth_spec(self, C_a, nu=2.0):
        """A TruthSpec whose A3 budget the family must respect."""
        return TruthSpec(self.p, self.K0, self.K1, nu, self.r, C_a)


def total_distance(family, omega, omega_tilde):
    """D^2 = u^2 sum_{K1} |w - w~| + v^2 sum_{K0} sum_l |w - w~|."""
    omega = np.asarray(omega)
    omega_tilde = np.asarray(omega_tilde)
    nk1 = len(family.K1)
    diff = np.abs(omega.astype(int) - omega_tilde.astype(int))
    return float(family.u ** 2 * diff[:nk1].sum() + family.v ** 2 * diff[nk1:].sum())


def build_test_family(s, s0, n, r, C_a, sigma, kappa, omega_max_s, phi_max, rng_seed, p=None, max_size=128):
    """Lower-bound test family with constant part on K1 and varying part on K0.

    K0 = {0..s-1} carries the varying components, K1 = {s..s+s0-1} the
    constant ones.  u^2 = 2 sigma^2 kappa / (n omega_max phi_max); l0_k comes
    from :func:`band_start` and one common v = min_k C_a (2 l0_k)^-(r_k+1/2) is
    used so that every component respects the A3 budget.

    Raises
    ------
    ValueError
        If kappa >= 1/8, s < 1 or n is below n_low.
    """
    if not 0 < kappa < 0.125:
        raise ValueError("kappa must lie in (0, 1/8)")
    if s < 1:
        raise ValueError("s must be at least 1")
    r = tuple(float(x) for x in np.broadcast_to(np.asarray(r, dtype=float), (s,)))
    r_max = max(r)
    n_low = (2.0 * sigma ** 2 * kappa / (C_a ** 2 * omega_max_s * phi_max)) * max(1.0, (6.0 / s) ** (2 * r_max + 1))
    if n < n_low:
        raise ValueError(f"n = {n} is below n_low = {n_low:.6g}")
    p = s + s0 if p is None else int(p)
    if p < s + s0:
        raise ValueError("p must be at least s + s0")
    u = math.sqrt(2.0 * sigma ** 2 * kappa / (n * omega_max_s * phi_max))
    l0 = tuple(band_start(C_a, n, omega_max_s, phi_max, sigma, kappa, rk) for rk in r)
    v = min(test_coefficient_v(C_a, l, rk) for l, rk in zip(l0, r))
    K0 = tuple(range(s))
    K1 = tuple(range(s, s + s0))
    length = len(K1) + sum(l0)
    omegas = greedy_packing(length, rng_seed, max_size=max_size)
    return TestFunctionFamily(p, min(u, C_a), v, l0, K0, K1, r, omegas, n_low)

