"""Symmetric second-order tensors and fourth-order tensors on Sym.

Tensors are stored as orthonormal 6-vectors in the order
(11, 22, 33, 23, 13, 12), off-diagonal entries scaled by sqrt(2), so that
``A . B = tr(A^T B)`` is the plain vector dot product.  Fourth-order
tensors acting on Sym are symmetric 6x6 matrices in the same basis.

Every function accepts arbitrary leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT2 = np.sqrt(2.0)

# (row, col) of the 3x3 entry held by each slot of the 6-vector
VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
_SCALE = np.array([1.0, 1.0, 1.0, SQRT2, SQRT2, SQRT2])

IDENTITY = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
IDENTITY4 = np.eye(6)
NULL4 = np.zeros((6, 6))


class InvalidTensorError(ValueError):
    """Raised for non-finite or wrongly shaped tensor input."""


def from_matrix(A) -> np.ndarray:
    """6-vector of the symmetric part of a (..., 3, 3) array."""
    A = np.asarray(A, dtype=float)
    if A.shape[-2:] != (3, 3):
        raise InvalidTensorError(f"expected (..., 3, 3), got {A.shape}")
    S = 0.5 * (A + np.swapaxes(A, -1, -2))
    out = np.stack([S[..., i, j] for i, j in VOIGT_PAIRS], axis=-1)
    return out * _SCALE


def to_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape[-1] != 6:
        raise InvalidTensorError(f"expected (..., 6), got {a.shape}")
    c = a / _SCALE
    M = np.empty(a.shape[:-1] + (3, 3))
    for k, (i, j) in enumerate(VOIGT_PAIRS):
        M[..., i, j] = c[..., k]
        M[..., j, i] = c[..., k]
    return M


def dot(a, b) -> np.ndarray:
    return np.einsum("...i,...i->...", a, b)


def norm(a) -> np.ndarray:
    return np.sqrt(dot(a, a))


def trace(a) -> np.ndarray:
    a = np.asarray(a)
    return a[..., 0] + a[..., 1] + a[..., 2]


def outer(A, B) -> np.ndarray:
    """Fourth-order tensor A (x) B, with (A (x) B)[H] = (B . H) A."""
    return np.einsum("...i,...j->...ij", A, B)


def apply(D, H) -> np.ndarray:
    """D[H] for a fourth-order tensor D."""
    return np.einsum("...ij,...j->...i", D, H)


def sym_dyad(a, b) -> np.ndarray:
    """sym(a (x) b) = (a (x) b + b (x) a)/2 as a 6-vector."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return from_matrix(np.einsum("...i,...j->...ij", a, b))


def dyad(a, b) -> np.ndarray:
    """Basis element O_ab built from two eigenvectors.

    a (x) a when a and b coincide, (a (x) b + b (x) a)/sqrt(2) otherwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    same = np.all(np.isclose(a, b, rtol=0.0, atol=1e-14), axis=-1)
    scale = np.where(same, 1.0, SQRT2)
    return scale[..., None] * sym_dyad(a, b)


@dataclass(frozen=True)
class SpectralDecomp:
    """Ordered eigen-decomposition of a (batch of) symmetric tensors.

    ``values[..., k]`` are sorted ascending, ``vectors[..., :, k]`` the
    matching unit eigenvectors and ``basis[..., r, :]`` the orthonormal
    basis of Sym in the order O11, O22, O33, O12, O13, O23.
    """

    values: np.ndarray
    vectors: np.ndarray
    basis: np.ndarray

    @property
    def O11(self):
        return self.basis[..., 0, :]

    @property
    def O22(self):
        return self.basis[..., 1, :]

    @property
    def O33(self):
        return self.basis[..., 2, :]

    @property
    def O12(self):
        return self.basis[..., 3, :]

    @property
    def O13(self):
        return self.basis[..., 4, :]

    @property
    def O23(self):
        return self.basis[..., 5, :]

    def reconstruct(self) -> np.ndarray:
        return np.einsum("...k,...kj->...j", self.values, self.basis[..., :3, :])


def _sign_fix(vectors: np.ndarray) -> np.ndarray:
    # first component that is not negligible must be positive
    absv = np.abs(vectors)
    thresh = 1e-12 * absv.max(axis=-2, keepdims=True)
    first = np.argmax(absv > thresh, axis=-2)
    lead = np.take_along_axis(vectors, first[..., None, :], axis=-2)
    sign = np.where(lead < 0.0, -1.0, 1.0)
    return vectors * sign


def spectral_decompose(E) -> SpectralDecomp:
    E = np.asarray(E, dtype=float)
    if E.shape[-1] != 6:
        raise InvalidTensorError(f"expected (..., 6), got {E.shape}")
    if not np.all(np.isfinite(E)):
        raise InvalidTensorError("non-finite tensor components")
    values, vectors = np.linalg.eigh(to_matrix(E))
    vectors = _sign_fix(vectors)
    q1, q2, q3 = vectors[..., :, 0], vectors[..., :, 1], vectors[..., :, 2]
    basis = np.stack(
        [
            sym_dyad(q1, q1),
            sym_dyad(q2, q2),
            sym_dyad(q3, q3),
            SQRT2 * sym_dyad(q1, q2),
            SQRT2 * sym_dyad(q1, q3),
            SQRT2 * sym_dyad(q2, q3),
        ],
        axis=-2,
    )
    return SpectralDecomp(values=values, vectors=vectors, basis=basis)


def eigvalsh(a) -> np.ndarray:
    """Ascending eigenvalues of a (batch of) 6-vector tensors."""
    return np.linalg.eigvalsh(to_matrix(a))


def is_symmetric4(D, rtol: float = 1e-9) -> bool:
    D = np.asarray(D)
    scale = np.abs(D).max() if D.size else 0.0
    return bool(np.abs(D - np.swapaxes(D, -1, -2)).max(initial=0.0) <= rtol * scale)
