import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import jacobi_eigh, mat_to_vec, vec_to_mat
from strategies import six_vectors, strains

from masonry_modal import tensors as ts


@given(six_vectors, six_vectors)
def test_dot_is_tensor_scalar_product(a, b):
    A, B = ts.to_matrix(a), ts.to_matrix(b)
    expected = np.trace(A.T @ B)
    assert abs(ts.dot(a, b) - expected) <= 1e-12 * (1.0 + np.linalg.norm(a) * np.linalg.norm(b))


@given(six_vectors)
def test_matrix_roundtrip_matches_independent_convention(a):
    assert np.allclose(ts.to_matrix(a), vec_to_mat(a), rtol=0, atol=1e-14)
    assert np.allclose(ts.from_matrix(ts.to_matrix(a)), a, rtol=0, atol=1e-13)
    assert np.allclose(mat_to_vec(ts.to_matrix(a)), a, rtol=0, atol=1e-13)


def test_from_matrix_takes_symmetric_part():
    A = np.arange(9.0).reshape(3, 3)
    assert np.allclose(ts.to_matrix(ts.from_matrix(A)), 0.5 * (A + A.T))


@given(six_vectors)
def test_spectral_reconstruct_idempotent_on_eigenvalues(a):
    d = ts.spectral_decompose(a)
    again = ts.spectral_decompose(d.reconstruct())
    scale = max(np.abs(d.values).max(), 1e-300)
    assert np.allclose(again.values, d.values, rtol=0, atol=1e-12 * scale)
    assert np.allclose(d.reconstruct(), a, rtol=0, atol=1e-12 * max(np.linalg.norm(a), 1e-300))


@given(six_vectors)
def test_spectral_basis_is_orthonormal_in_sym(a):
    d = ts.spectral_decompose(a)
    assert np.allclose(d.basis @ d.basis.T, np.eye(6), atol=1e-12)
    assert np.allclose(d.vectors.T @ d.vectors, np.eye(3), atol=1e-12)
    assert np.all(np.diff(d.values) >= 0)


@given(six_vectors)
def test_eigenvalues_match_jacobi_oracle(a):
    w, _ = jacobi_eigh(vec_to_mat(a))
    scale = max(np.linalg.norm(a), 1e-300)
    assert np.allclose(ts.eigvalsh(a), w, rtol=0, atol=1e-12 * scale)


@given(strains())
def test_psd_input_has_nonnegative_eigenvalues(e):
    A = ts.to_matrix(e)
    P = ts.from_matrix(A @ A)  # PSD by construction
    assert ts.eigvalsh(P)[0] >= -1e-12 * ts.norm(P)


@pytest.mark.parametrize("values", [(1.0, 1.0, 2.0), (3.0, 3.0, 3.0), (0.0, 0.0, 0.0), (-1.0, 2.0, 2.0)])
def test_repeated_eigenvalues_give_orthonormal_frame(values):
    rng = np.random.default_rng(3)
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    a = ts.from_matrix((Q * values) @ Q.T)
    d = ts.spectral_decompose(a)
    assert np.allclose(d.values, sorted(values), atol=1e-14)
    assert np.allclose(d.basis @ d.basis.T, np.eye(6), atol=1e-12)
    assert np.allclose(d.reconstruct(), a, atol=1e-14)


def test_spectral_frame_is_deterministic():
    a = np.array([1.0, -2.0, 0.5, 0.3, -0.1, 0.7])
    d1, d2 = ts.spectral_decompose(a), ts.spectral_decompose(a.copy())
    assert np.array_equal(d1.vectors, d2.vectors)
    lead = [v[np.argmax(np.abs(v) > 1e-12)] for v in d1.vectors.T]
    assert all(x > 0 for x in lead)


def test_batched_matches_single():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 5, 6))
    batch = ts.spectral_decompose(A)
    single = ts.spectral_decompose(A[2, 3])
    assert np.allclose(batch.values[2, 3], single.values)
    assert np.allclose(batch.basis[2, 3], single.basis)


def test_named_basis_elements():
    d = ts.spectral_decompose(np.array([1.0, 2.0, 3.0, 0.0, 0.0, 0.0]))
    assert np.allclose(d.O11, [1, 0, 0, 0, 0, 0])
    assert np.allclose(d.O33, [0, 0, 1, 0, 0, 0])
    assert np.allclose(d.O12, [0, 0, 0, 0, 0, 1])
    assert np.isclose(ts.norm(d.O23), 1.0)


def test_outer_and_apply():
    A = np.array([1.0, 2.0, 3.0, 0.0, 0.0, 0.0])
    B = np.array([0.0, 1.0, 0.0, 1.0, 0.0, 0.0])
    H = np.array([2.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    assert np.allclose(ts.apply(ts.outer(A, B), H), (B @ H) * A)
    assert ts.trace(A) == 6.0


def test_dyad_scaling():
    e1, e2 = np.eye(3)[0], np.eye(3)[1]
    assert np.isclose(ts.norm(ts.dyad(e1, e2)), 1.0)
    assert np.allclose(ts.dyad(e1, e1), [1, 0, 0, 0, 0, 0])


@pytest.mark.parametrize("bad", [np.zeros(5), np.array([np.nan, 0, 0, 0, 0, 0]), np.array([np.inf, 0, 0, 0, 0, 0])])
def test_invalid_tensor_rejected(bad):
    with pytest.raises(ts.InvalidTensorError):
        ts.spectral_decompose(bad)


def test_is_symmetric4():
    D = np.arange(36.0).reshape(6, 6)
    assert not ts.is_symmetric4(D)
    assert ts.is_symmetric4(D + D.T)


@settings(max_examples=50)
@given(st.floats(1e-6, 1e6))
def test_eigenvalues_scale_linearly(k):
    a = np.array([0.3, -1.0, 2.0, 0.4, 0.1, -0.2])
    assert np.allclose(ts.eigvalsh(k * a), k * ts.eigvalsh(a), rtol=1e-12)
