"""Deterministic symmetric eigendecomposition and PSD matrix calculus.

Public functions accept plain arrays, ``SymMatrix`` or ``Covariance``
instances; input is coerced to float64 and symmetrized on entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatchError, NonFiniteError, NotPSDError

EPS = float(np.finfo(np.float64).eps)


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def as_matrix(m) -> np.ndarray:
    """Underlying square float64 array of a matrix-like object."""
    if isinstance(m, (SymMatrix, Covariance)):
        return m.mat
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimMismatchError(f"expected a square matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition of a symmetric matrix.

    ``values`` are in descending order and ``vectors[:, k]`` is the unit
    eigenvector paired with ``values[k]``.
    """

    values: np.ndarray
    vectors: np.ndarray


class SymMatrix:
    """Square symmetric matrix with finite entries.

    Construction symmetrizes through ``(M + M.T) / 2`` and rejects NaN or
    infinite input, so ``mat[i, j] == mat[j, i]`` holds exactly.
    """

    __slots__ = ("mat",)

    def __init__(self, entries):
        a = as_matrix(entries)
        if not np.all(np.isfinite(a)):
            raise NonFiniteError("matrix entries must be finite")
        m = symmetrize(a)
        m.flags.writeable = False
        self.mat = m

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.array(self.mat, dtype=dtype) if copy else np.asarray(self.mat, dtype=dtype)

    def __repr__(self):
        return f"SymMatrix(dim={self.dim})"


class Covariance:
    """Symmetric PSD matrix carrying its eigendecomposition.

    Instances come from ``validate_psd``; ``spectrum.values`` is descending and
    nonnegative (tolerated negative noise is clamped at validation).
    """

    __slots__ = ("mat", "spectrum")

    def __init__(self, mat: np.ndarray, spectrum: Spectrum):
        self.mat = mat
        self.spectrum = spectrum

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.mat))

    def __array__(self, dtype=None, copy=None):
        return np.array(self.mat, dtype=dtype) if copy else np.asarray(self.mat, dtype=dtype)

    def __repr__(self):
        return f"Covariance(dim={self.dim}, trace={self.trace:.6g})"


def sym_eigen(m) -> Spectrum:
    """Eigendecomposition of a symmetric matrix with a deterministic convention.

    Eigenvalues are sorted in descending order; exact ties are broken by the
    row index of each eigenvector's largest-magnitude component (first index on
    further ties).  Signs are fixed so that component is positive.
    """
    a = as_matrix(m)
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("matrix entries must be finite")
    w, v = np.linalg.eigh(symmetrize(a))
    dom = np.argmax(np.abs(v), axis=0)
    order = sorted(range(w.size), key=lambda i: (-w[i], dom[i]))
    values = w[list(order)].copy()
    vectors = v[:, list(order)].copy()
    for k, i in enumerate(order):
        if vectors[dom[i], k] < 0.0:
            vectors[:, k] *= -1.0
    values.flags.writeable = False
    vectors.flags.writeable = False
    return Spectrum(values, vectors)


def default_psd_tol(values: np.ndarray) -> float:
    """PSD tolerance dim * eps * max|eigenvalue| for a given spectrum."""
    if values.size == 0:
        return 0.0
    return values.size * EPS * float(np.max(np.abs(values)))


def validate_psd(m, psd_tol: float | None = None) -> Covariance:
    """Check positive semidefiniteness within tolerance and clamp noise.

    Eigenvalues in ``[-tol, 0)`` are set to zero and the matrix is rebuilt from
    the clamped spectrum; an eigenvalue below ``-tol`` raises ``NotPSDError``.
    A matrix with no negative eigenvalues is passed through unchanged.
    """
    if isinstance(m, Covariance):
        return m
    spec = sym_eigen(m)
    tol = default_psd_tol(spec.values) if psd_tol is None else float(psd_tol)
    lam_min = float(spec.values[-1]) if spec.values.size else 0.0
    if lam_min < -tol:
        raise NotPSDError(lam_min)
    if lam_min < 0.0:
        clamped = np.maximum(spec.values, 0.0)
        clamped.flags.writeable = False
        mat = symmetrize((spec.vectors * clamped) @ spec.vectors.T)
        spec = Spectrum(clamped, spec.vectors)
    else:
        mat = symmetrize(as_matrix(m))
    mat.flags.writeable = False
    return Covariance(mat, spec)


def rank_cutoff(values: np.ndarray, rank_tol: float | None = None) -> float:
    """Absolute eigenvalue cutoff ``rank_tol * lambda_max``.

    ``rank_tol`` is relative to the largest eigenvalue and defaults to
    dim * machine_eps.
    """
    if values.size == 0:
        return 0.0
    rel = values.size * EPS if rank_tol is None else float(rank_tol)
    return rel * float(values[0])


def sqrt_psd(s, psd_tol: float | None = None) -> SymMatrix:
    """Unique PSD square root, by mapping eigenvalues to their roots."""
    c = validate_psd(s, psd_tol)
    v = c.spectrum.vectors
    return SymMatrix((v * np.sqrt(c.spectrum.values)) @ v.T)


def pinv_sqrt(s, rank_tol: float | None = None) -> SymMatrix:
    """Moore-Penrose inverse square root.

    Eigenvalues above the rank cutoff map to ``1 / sqrt(lambda)``, the rest to
    zero, so the result inverts the root of ``s`` on its numerical range and
    vanishes on the numerical kernel.
    """
    c = validate_psd(s)
    values, vectors = c.spectrum.values, c.spectrum.vectors
    cutoff = rank_cutoff(values, rank_tol)
    inv = np.zeros_like(values)
    mask = values > cutoff
    inv[mask] = 1.0 / np.sqrt(values[mask])
    return SymMatrix((vectors * inv) @ vectors.T)


def trace_sqrt(s) -> float:
    """Trace of the PSD square root, computed as the sum of eigenvalue roots."""
    c = validate_psd(s)
    return float(np.sum(np.sqrt(c.spectrum.values)))


def norms(a) -> tuple[float, float, float]:
    """(operator, Hilbert-Schmidt, trace) norms of a symmetric matrix.

    All three are evaluated from the eigenvalues: max|l|, sqrt(sum l^2),
    sum|l|.
    """
    values = sym_eigen(a).values
    ab = np.abs(values)
    return float(ab.max()), float(np.sqrt(np.sum(values * values))), float(ab.sum())


# Helpers for symmetric products that are PSD in exact arithmetic (for example
# R @ S @ R with R symmetric and S PSD).  Negative eigenvalues of such products
# can only be rounding noise, so they are clamped without a tolerance gate.

def clamped_eigh(a) -> tuple[np.ndarray, np.ndarray]:
    spec = sym_eigen(a)
    return np.maximum(spec.values, 0.0), spec.vectors


def psd_product_root(a) -> np.ndarray:
    w, v = clamped_eigh(a)
    return symmetrize((v * np.sqrt(w)) @ v.T)


def cov_from_product(a) -> Covariance:
    """Covariance built from a symmetric product that is PSD in exact arithmetic.

    The matrix is rebuilt from its clamped spectrum, so the result is PSD by
    construction regardless of rounding noise in the product.
    """
    w, v = clamped_eigh(a)
    mat = symmetrize((v * w) @ v.T)
    mat.flags.writeable = False
    w.flags.writeable = False
    return Covariance(mat, Spectrum(w, v))


def trace_sqrt_clamped(a) -> float:
    w = np.linalg.eigvalsh(symmetrize(a))
    return float(np.sum(np.sqrt(np.maximum(w, 0.0))))


def trace_norm(a) -> float:
    w = np.linalg.eigvalsh(symmetrize(a))
    return float(np.sum(np.abs(w)))


def operator_norm(a) -> float:
    w = np.linalg.eigvalsh(symmetrize(a))
    return float(np.max(np.abs(w))) if w.size else 0.0
