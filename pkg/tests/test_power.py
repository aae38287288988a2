import numpy as np
import pytest

from conftest import rng_for
from tensordecomp import (
    IDENTITY,
    ConvergenceError,
    DataError,
    DenseTensor,
    KruskalTensor,
    PowerConfig,
    ConfigurationError,
    extract_eigenpairs,
    kruskal_to_dense,
    matrix_power_method,
    multilinear_transform,
    tensor_power_step,
)
from tensordecomp.power import symmetric_contraction


def odeco(lams, vecs):
    lams = np.asarray(lams, dtype=float)
    return kruskal_to_dense(KruskalTensor(lams, [vecs, vecs, vecs]))


def planted(seed, d=8, k=5):
    rng = rng_for(80, seed)
    q, _ = np.linalg.qr(rng.standard_normal((d, k)))
    lams = rng.uniform(1.0, 5.0, size=k)
    return odeco(lams, q), lams, q


class TestMatrixPower:
    def test_diag(self):
        p = matrix_power_method(np.diag([3.0, 1.0]))
        assert p.value == pytest.approx(3.0, rel=1e-10)
        assert abs(p.vector[0]) == pytest.approx(1.0, abs=1e-6)

    def test_identity(self):
        p = matrix_power_method(np.eye(4))
        assert p.value == pytest.approx(1.0)
        assert np.linalg.norm(p.vector) == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_symmetric(self, seed):
        rng = rng_for(81, seed)
        q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        evals = np.array([4.0, 2.0, 1.0, 0.5])
        m = q @ np.diag(evals) @ q.T
        p = matrix_power_method(m, seed=seed)
        w, v = np.linalg.eigh(m)
        assert p.value == pytest.approx(w[-1], rel=1e-8)
        assert abs(p.vector @ v[:, -1]) >= 1 - 1e-8

    def test_asymmetric(self):
        with pytest.raises(DataError):
            matrix_power_method(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestPowerStep:
    def test_fixed_point(self):
        e1 = np.eye(3)[:, 0]
        t = odeco([1.0], e1[:, None])
        v, norm = tensor_power_step(t, e1)
        np.testing.assert_allclose(v, e1)
        assert norm == pytest.approx(1.0)

    def test_exact_eigenvector_stays(self):
        t = odeco([3.0, 2.0, 1.0], np.eye(3))
        v, norm = tensor_power_step(t, np.eye(3)[:, 1])
        np.testing.assert_allclose(v, np.eye(3)[:, 1], atol=1e-15)
        assert norm == pytest.approx(2.0)

    def test_contraction_matches_transform(self):
        rng = rng_for(82)
        t, _, _ = planted(0, d=4, k=3)
        v = rng.standard_normal(4)
        np.testing.assert_allclose(
            symmetric_contraction(t)(v), multilinear_transform(t, [IDENTITY, v, v]).data, rtol=1e-14
        )


class TestExtract:
    def test_diagonal(self):
        pairs = extract_eigenpairs(odeco([3.0, 2.0, 1.0], np.eye(3)), PowerConfig(n_pairs=3))
        found = sorted((round(p.value, 10), int(np.argmax(np.abs(p.vector)))) for p in pairs)
        assert found == [(1.0, 2), (2.0, 1), (3.0, 0)]

    @pytest.mark.parametrize("seed", range(4))
    def test_plant_and_recover(self, seed):
        t, lams, q = planted(seed)
        pairs, residual = extract_eigenpairs(t, PowerConfig(n_pairs=5, seed=seed), return_residual=True)
        v = np.column_stack([p.vector for p in pairs])
        vals = np.array([p.value for p in pairs])
        order = np.argmax(np.abs(v.T @ q), axis=0)
        np.testing.assert_allclose(vals[order], lams, rtol=0, atol=1e-8)
        assert np.all(np.abs(np.sum(v[:, order] * q, axis=0)) >= 1 - 1e-8)
        assert np.linalg.norm(residual.data) <= 1e-8 * np.linalg.norm(t.data)
        for p in pairs:
            assert p.value > 0
            assert abs(np.linalg.norm(p.vector) - 1) <= 1e-12
            assert p.residual <= 1e-6 * max(p.value, 1)

    def test_deflation_reduces_norm(self):
        t, lams, q = planted(7)
        arr = t.data
        norm2 = np.sum(arr ** 2)
        for p in extract_eigenpairs(t, PowerConfig(n_pairs=5, seed=7)):
            arr = arr - p.value * np.einsum("i,j,k->ijk", p.vector, p.vector, p.vector)
            new = np.sum(arr ** 2)
            assert new == pytest.approx(norm2 - p.value ** 2, rel=1e-8, abs=1e-10)
            norm2 = new

    def test_negative_weight_reported_positive(self):
        e = np.eye(3)
        pairs = extract_eigenpairs(odeco([-2.0], e[:, :1]), PowerConfig(n_pairs=1))
        assert pairs[0].value == pytest.approx(2.0)
        np.testing.assert_allclose(pairs[0].vector, -e[:, 0], atol=1e-10)

    def test_zero_tensor(self):
        with pytest.raises(ConvergenceError):
            extract_eigenpairs(DenseTensor.zeros((3, 3, 3)), PowerConfig(n_pairs=1))

    def test_partial_results(self):
        t = odeco([2.0], np.eye(3)[:, :1])
        with pytest.raises(ConvergenceError) as info:
            extract_eigenpairs(t, PowerConfig(n_pairs=2))
        assert len(info.value.partial) == 1

    def test_asymmetric_rejected(self):
        t = rng_for(83).standard_normal((3, 3, 3))
        with pytest.raises(DataError):
            extract_eigenpairs(t, PowerConfig(n_pairs=1))

    def test_too_many_pairs(self):
        with pytest.raises(ConfigurationError):
            extract_eigenpairs(odeco([1.0], np.eye(2)[:, :1]), PowerConfig(n_pairs=3))

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            PowerConfig(n_pairs=0)
        with pytest.raises(ConfigurationError):
            PowerConfig(n_pairs=1, restarts=0)
