import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import X1, rng_for
from tensordecomp import (
    IDENTITY,
    DimensionError,
    KruskalTensor,
    hadamard,
    khatri_rao,
    kronecker,
    kruskal_to_dense,
    mode_n_matrix_product,
    mode_n_vector_product,
    multilinear_transform,
    unfold,
)
from tensordecomp.products import matricized_product, mode_products


class TestKronecker:
    def test_shape(self):
        assert kronecker(np.ones((2, 3)), np.ones((4, 5))).shape == (8, 15)

    def test_blocks(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([[0.0, 1.0], [1.0, 0.0]])
        k = kronecker(a, b)
        for i, j in itertools.product(range(2), range(2)):
            np.testing.assert_array_equal(k[2 * i:2 * i + 2, 2 * j:2 * j + 2], a[i, j] * b)

    def test_mixed_product(self):
        rng = rng_for(10)
        a, b, c, d = (rng.standard_normal((2, 2)) for _ in range(4))
        np.testing.assert_allclose(
            kronecker(a, b) @ kronecker(c, d), kronecker(a @ c, b @ d), rtol=1e-12, atol=1e-14
        )


class TestKhatriRao:
    def test_columns_are_kronecker(self):
        rng = rng_for(11)
        a, b = rng.standard_normal((3, 2)), rng.standard_normal((4, 2))
        kr = khatri_rao(a, b)
        assert kr.shape == (12, 2)
        for r in range(2):
            np.testing.assert_array_equal(kr[:, r], np.kron(a[:, r], b[:, r]))

    def test_column_mismatch(self):
        with pytest.raises(DimensionError):
            khatri_rao(np.ones((2, 2)), np.ones((2, 3)))

    def test_unfold_identity(self):
        rng = rng_for(12)
        a, b, c = (rng.standard_normal((2, 2)) for _ in range(3))
        t = kruskal_to_dense(KruskalTensor(np.ones(2), [a, b, c]))
        np.testing.assert_allclose(unfold(t, 1), a @ khatri_rao(c, b).T, rtol=1e-13, atol=1e-14)

    def test_gram_identity(self):
        rng = rng_for(13)
        a, b = rng.standard_normal((3, 2)), rng.standard_normal((3, 2))
        kr = khatri_rao(a, b)
        np.testing.assert_allclose(kr.T @ kr, hadamard(a.T @ a, b.T @ b), rtol=1e-12)


class TestHadamard:
    def test_elementwise(self):
        np.testing.assert_array_equal(hadamard([[1, 2], [3, 4]], [[2, 0], [1, 3]]), [[2, 0], [3, 12]])

    def test_mismatch(self):
        with pytest.raises(DimensionError):
            hadamard(np.ones((2, 2)), np.ones((2, 3)))


class TestModeProducts:
    def test_slice_extraction(self, example_tensor):
        out = mode_n_matrix_product(example_tensor, np.array([[1.0, 0.0]]), 3)
        assert out.shape == (3, 4, 1)
        np.testing.assert_array_equal(out.data[:, :, 0], X1)

    @pytest.mark.parametrize("mode", [1, 2, 3])
    def test_matches_matricized(self, mode):
        rng = rng_for(14, mode)
        t = rng.standard_normal((3, 4, 5))
        m = rng.standard_normal((2, t.shape[mode - 1]))
        np.testing.assert_allclose(
            mode_n_matrix_product(t, m, mode).data, matricized_product(t, m, mode).data,
            rtol=1e-12, atol=1e-13,
        )

    def test_nonconforming(self, example_tensor):
        with pytest.raises(DimensionError):
            mode_n_matrix_product(example_tensor, np.ones((2, 3)), 2)
        with pytest.raises(DimensionError):
            mode_n_vector_product(example_tensor, np.ones(3), 2)

    def test_vector_product_frontal_slice(self, example_tensor):
        out = mode_n_vector_product(example_tensor, [1.0, 0.0], 3)
        np.testing.assert_array_equal(out.data, X1)

    def test_vector_product_is_row_matrix_product(self):
        rng = rng_for(15)
        t = rng.standard_normal((3, 4, 2))
        v = rng.standard_normal(4)
        via_matrix = mode_n_matrix_product(t, v[None, :], 2).data[:, 0, :]
        np.testing.assert_allclose(mode_n_vector_product(t, v, 2).data, via_matrix, rtol=1e-13)

    def test_distinct_modes_commute(self):
        rng = rng_for(16)
        t = rng.standard_normal((3, 4, 5))
        a, b = rng.standard_normal((2, 3)), rng.standard_normal((6, 5))
        ab = mode_n_matrix_product(mode_n_matrix_product(t, a, 1), b, 3)
        ba = mode_n_matrix_product(mode_n_matrix_product(t, b, 3), a, 1)
        np.testing.assert_allclose(ab.data, ba.data, rtol=1e-12, atol=1e-13)

    def test_same_mode_composes(self):
        rng = rng_for(17)
        t = rng.standard_normal((3, 4))
        a, b = rng.standard_normal((5, 3)), rng.standard_normal((2, 5))
        twice = mode_n_matrix_product(mode_n_matrix_product(t, a, 1), b, 1)
        np.testing.assert_allclose(twice.data, mode_n_matrix_product(t, b @ a, 1).data, rtol=1e-12)

    def test_mode_products_transpose(self):
        rng = rng_for(18)
        t = rng.standard_normal((3, 4, 2))
        ms = [rng.standard_normal((s, 2)) for s in t.shape]
        out = mode_products(t, ms, transpose=True)
        np.testing.assert_allclose(out.data, multilinear_transform(t, ms).data, rtol=1e-12)


class TestMultilinearTransform:
    def test_orthonormal_eigenvector(self):
        rng = rng_for(19)
        q, _ = np.linalg.qr(rng.standard_normal((4, 3)))
        w = np.array([3.0, 2.0, 0.5])
        t = kruskal_to_dense(KruskalTensor(w, [q, q, q]))
        out = multilinear_transform(t, [IDENTITY, q[:, 0], q[:, 0]])
        np.testing.assert_allclose(out.data, w[0] * q[:, 0], atol=1e-13)

    @pytest.mark.parametrize("shape", [(2,), (3, 2), (2, 3, 3), (3, 3, 3)])
    def test_all_vectors_brute_force(self, shape):
        rng = rng_for(20, *shape)
        t = rng.standard_normal(shape)
        vs = [rng.standard_normal(s) for s in shape]
        total = 0.0
        for idx in itertools.product(*(range(s) for s in shape)):
            total += t[idx] * np.prod([v[i] for v, i in zip(vs, idx)])
        got = multilinear_transform(t, vs)
        assert isinstance(got, float)
        assert got == pytest.approx(total, rel=1e-12)

    def test_matrices_apply_transpose(self):
        rng = rng_for(21)
        t = rng.standard_normal((3, 4, 2))
        m = rng.standard_normal((4, 5))
        out = multilinear_transform(t, [IDENTITY, m, IDENTITY])
        np.testing.assert_allclose(out.data, mode_n_matrix_product(t, m.T, 2).data, rtol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_dense_and_kruskal_paths_agree(self, seed):
        rng = rng_for(22, seed)
        k = KruskalTensor(rng.standard_normal(2), [rng.standard_normal((2, 2)) for _ in range(3)])
        maps = [IDENTITY, rng.standard_normal(2), rng.standard_normal((2, 3))]
        dense = multilinear_transform(k.full(), maps)
        kr = multilinear_transform(k, maps)
        np.testing.assert_allclose(kr.data, dense.data, rtol=1e-12, atol=1e-14)
        vecs = [rng.standard_normal(2) for _ in range(3)]
        assert multilinear_transform(k, vecs) == pytest.approx(
            multilinear_transform(k.full(), vecs), rel=1e-12
        )

    def test_wrong_map_count(self):
        with pytest.raises(DimensionError):
            multilinear_transform(np.ones((2, 2, 2)), [IDENTITY, IDENTITY])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
    def test_linear_in_each_vector(self, seed, alpha, beta):
        rng = np.random.default_rng(seed)
        t = rng.standard_normal((3, 3, 3))
        u, v, x, y = (rng.standard_normal(3) for _ in range(4))
        lhs = multilinear_transform(t, [IDENTITY, alpha * u + beta * v, x]).data
        rhs = (alpha * multilinear_transform(t, [IDENTITY, u, x]).data
               + beta * multilinear_transform(t, [IDENTITY, v, x]).data)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-9)
