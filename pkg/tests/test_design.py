import numpy as np
import pytest

from sparsevcm.basis import BasisSpec, basis_matrix
from sparsevcm.design import (
    Dataset,
    assemble_design,
    cone_condition_probe,
    gram,
    kronecker_gram,
    read_dataset_csv,
    restricted_eigs,
    write_dataset_csv,
)
from sparsevcm.model import BlockLayout
from sparsevcm.synth import DictionarySpec, sample_dictionary

from oracles import explicit_design


def _data(n, p, seed, kind="gaussian"):
    rng = np.random.default_rng(seed)
    W = sample_dictionary(DictionarySpec(kind, p), n, seed)
    return Dataset(W, rng.uniform(size=n), rng.normal(size=n), 0.5)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 3)), [0.1, 0.2], [0, 0, 0], 1.0)
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), [0.1, 1.2], [0, 0], 1.0)
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), [0.1, 0.2], [0, np.nan], 1.0)
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), [0.1, 0.2], [0, 0], -1.0)
    d = _data(5, 2, 0)
    assert (d.n, d.p) == (5, 2)
    with pytest.raises(ValueError):
        d.Y[0] = 1.0


def test_design_matches_entrywise_oracle():
    for seed in range(5):
        d = _data(12, 3, seed)
        spec = BasisSpec("haar" if seed % 2 else "fourier", 5)
        np.testing.assert_array_equal(assemble_design(d, spec).B, explicit_design(d.W, basis_matrix(spec, d.times)))


def test_design_hand_examples():
    d = _data(6, 1, 1)
    np.testing.assert_array_equal(assemble_design(d, BasisSpec("fourier", 1)).B[:, 0], d.W[0])
    # phi(t) = (1, x) with x = sqrt2 sin(2 pi t)
    t = 0.125
    x = np.sqrt(2) * np.sin(2 * np.pi * t)
    d = Dataset(np.array([[2.0], [-3.0]]), [t], [0.0], 1.0)
    np.testing.assert_allclose(assemble_design(d, BasisSpec("fourier", 2)).B[0], [2, 2 * x, -3, -3 * x])
    with pytest.raises(ValueError):
        assemble_design(Dataset(np.zeros((2, 0)), [], [], 1.0), BasisSpec("fourier", 2))


@pytest.mark.parametrize("kind", ["gaussian", "bernoulli", "canonical"])
def test_kronecker_identity(kind):
    rng = np.random.default_rng(7)
    for _ in range(10):
        n, p, L = int(rng.integers(1, 51)), int(rng.integers(1, 6)), int(rng.integers(0, 7))
        d = _data(n, p, int(rng.integers(1 << 30)), kind)
        B = explicit_design(d.W, basis_matrix(BasisSpec("fourier", L + 1), d.times))
        S = kronecker_gram(d, BasisSpec("fourier", L + 1)) * n
        ref = B.T @ B
        assert np.linalg.norm(ref - S) / max(np.linalg.norm(ref), 1e-300) < 1e-12


def test_gram_paths_agree_and_psd():
    d = _data(40, 3, 3)
    spec = BasisSpec("haar", 6)
    g1 = gram(d, spec, "kron")
    g2 = gram(d, spec, "direct")
    assert np.linalg.norm(g1.Sigma_hat - g2.Sigma_hat) <= 1e-12 * np.linalg.norm(g2.Sigma_hat)
    assert np.array_equal(g1.Sigma_hat, g1.Sigma_hat.T)
    assert np.linalg.eigvalsh(g1.Sigma_hat)[0] >= -1e-10 * np.linalg.norm(g1.Sigma_hat, 2)
    np.testing.assert_allclose(g1.Omega_hat, d.W @ d.W.T / d.n)
    with pytest.raises(ValueError):
        gram(d, spec, "svd")


def test_gram_scalar_case():
    d = _data(30, 1, 4)
    g = gram(d, BasisSpec("fourier", 1))
    assert g.Sigma_hat[0, 0] == pytest.approx(np.mean(d.W[0] ** 2), rel=1e-14)


def test_gram_near_identity_for_gaussian():
    d = _data(200000, 2, 5)
    g = gram(d, BasisSpec("fourier", 3), "direct")
    assert np.max(np.abs(g.Sigma_hat - np.eye(6))) < 0.03


def test_restricted_eigs_full_set_and_interlacing():
    d = _data(300, 6, 6)
    spec = BasisSpec("fourier", 4)
    S = gram(d, spec).Sigma_hat
    ev = np.linalg.eigvalsh(S)
    full = restricted_eigs(d, spec, 6, 2, 0)
    for sub, lo, hi in full:
        assert sub == tuple(range(6))
        assert lo == pytest.approx(ev[0], rel=1e-10) and hi == pytest.approx(ev[-1], rel=1e-10)
    for sub, lo, hi in restricted_eigs(d, spec, 3, 30, 1):
        assert len(set(sub)) == 3 and list(sub) == sorted(sub)
        assert lo >= ev[0] - 1e-12 and hi <= ev[-1] + 1e-12


def test_restricted_eigs_scalar_and_errors():
    d = _data(50, 1, 8)
    [(sub, lo, hi)] = restricted_eigs(d, BasisSpec("fourier", 1), 1, 1, 0)
    assert lo == pytest.approx(np.mean(d.W[0] ** 2)) and hi == pytest.approx(lo)
    with pytest.raises(ValueError):
        restricted_eigs(d, BasisSpec("fourier", 1), 2, 1, 0)


def test_restricted_eigs_thread_independent():
    d = _data(200, 8, 9)
    spec = BasisSpec("fourier", 3)
    assert restricted_eigs(d, spec, 3, 20, 11, threads=1) == restricted_eigs(d, spec, 3, 20, 11, threads=4)


def test_cone_probe():
    lay = BlockLayout(5, 2)
    spec = BasisSpec("fourier", 5)
    d = _data(4000, 4, 10)
    val = cone_condition_probe(d, spec, lay, [(0, 0), (1, 1)], 50, 0)
    assert 0 < val < 2
    zero = Dataset(np.zeros((4, 20)), np.linspace(0, 1, 20), np.zeros(20), 1.0)
    assert cone_condition_probe(zero, spec, lay, [(0, 0)], 5, 0) == 0.0
    with pytest.raises(ValueError):
        cone_condition_probe(d, spec, lay, [], 5, 0)


def test_cone_probe_on_isometric_design():
    # canonical-like design with orthonormal columns up to sampling noise
    d = _data(100000, 2, 12)
    val = cone_condition_probe(d, BasisSpec("fourier", 3), BlockLayout(3, 2), [(0, 0), (0, 1), (1, 0), (1, 1)], 20, 0)
    assert abs(val - 1) < 0.05


def test_dataset_csv_roundtrip(tmp_path):
    d = _data(7, 3, 13)
    path = tmp_path / "d.csv"
    write_dataset_csv(d, path)
    assert path.read_text().splitlines()[0] == "i,t,Y,W_1,W_2,W_3"
    e = read_dataset_csv(path, 0.5)
    for name in ("W", "times", "Y"):
        np.testing.assert_array_equal(getattr(d, name), getattr(e, name))
    path.write_text("i,t,Y,X_1\n1,0.5,0.1,1\n")
    with pytest.raises(ValueError):
        read_dataset_csv(path, 1.0)
