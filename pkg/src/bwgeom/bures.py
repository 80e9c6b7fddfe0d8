"""Procrustes (Bures-Wasserstein) distance and optimal transport between covariances.

The squared distance between PSD matrices S1, S2 is

    tr S1 + tr S2 - 2 tr (S2^{1/2} S1 S2^{1/2})^{1/2},

which equals the squared 2-Wasserstein distance between the centred Gaussians
with these covariances, and also the minimum of ||S1^{1/2} - U S2^{1/2}||_HS
over orthogonal U.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatchError, KernelConditionError, NonFiniteError
from .spectral import (
    EPS,
    Covariance,
    SymMatrix,
    operator_norm,
    pinv_sqrt,
    psd_product_root,
    rank_cutoff,
    sqrt_psd,
    symmetrize,
    trace_sqrt_clamped,
    validate_psd,
)


@dataclass(frozen=True)
class TransportMap:
    """Symmetric PSD matrix t with t @ S1 @ t = S2 (acting as identity on ker S1)."""

    map: SymMatrix
    source_rank_tol: float

    def condition(self) -> float:
        """Ratio of the largest to the smallest positive eigenvalue (diagnostic)."""
        w = np.linalg.eigvalsh(self.map.mat)
        cutoff = rank_cutoff(np.sort(w)[::-1])
        pos = w[w > cutoff]
        if pos.size == 0:
            return math.inf
        return float(pos.max() / pos.min())


@dataclass(frozen=True)
class AlignmentResult:
    """Optimal orthogonal alignment of matrix roots.

    ``distance`` equals ``||sqrt(S1) - rotation @ sqrt(S2)||_HS`` evaluated at
    the returned rotation.
    """

    distance: float
    rotation: np.ndarray


def _check_pair(s1, s2) -> tuple[Covariance, Covariance]:
    a = validate_psd(s1)
    b = validate_psd(s2)
    if a.dim != b.dim:
        raise DimMismatchError(f"covariance dimensions differ: {a.dim} vs {b.dim}")
    return a, b


def _cross_trace(a: Covariance, b: Covariance) -> float:
    """tr of the root of S2^{1/2} S1 S2^{1/2}, which is symmetric in S1, S2.

    The nonzero spectrum equals that of L^T S L for an exact-rank factor
    L L^T of the other argument, so evaluating through the lower-rank side
    avoids square roots of spurious near-zero eigenvalues.
    """
    ranks = []
    for c in (a, b):
        w = c.spectrum.values
        ranks.append(int(np.sum(w > rank_cutoff(w))))
    lo, hi = (a, b) if ranks[0] <= ranks[1] else (b, a)
    r = min(ranks)
    w = lo.spectrum.values[:r]
    l = lo.spectrum.vectors[:, :r] * np.sqrt(w)
    return trace_sqrt_clamped(l.T @ hi.mat @ l)


def procrustes_distance_squared(s1, s2) -> float:
    """Squared Procrustes distance; the radicand is clamped at zero."""
    a, b = _check_pair(s1, s2)
    return max(0.0, a.trace + b.trace - 2.0 * _cross_trace(a, b))


def procrustes_distance(s1, s2) -> float:
    """Procrustes (Bures-Wasserstein) distance between two PSD matrices."""
    return math.sqrt(procrustes_distance_squared(s1, s2))


def procrustes_distance_via_alignment(s1, s2) -> AlignmentResult:
    """Distance through the explicit orthogonal alignment of matrix roots.

    The optimal rotation is the transposed orthogonal polar factor of
    ``sqrt(S2) @ sqrt(S1)``, computed from its singular value decomposition;
    the distance is evaluated literally at that rotation.
    """
    a, b = _check_pair(s1, s2)
    r1 = sqrt_psd(a).mat
    r2 = sqrt_psd(b).mat
    w, _, vt = np.linalg.svd(r2 @ r1)
    u = vt.T @ w.T
    dist = float(np.linalg.norm(r1 - u @ r2))
    return AlignmentResult(distance=dist, rotation=u)


def gaussian_w2(m1, s1, m2, s2) -> float:
    """2-Wasserstein distance between Gaussians (m1, S1) and (m2, S2)."""
    v1 = np.asarray(m1, dtype=np.float64).reshape(-1)
    v2 = np.asarray(m2, dtype=np.float64).reshape(-1)
    if not (np.all(np.isfinite(v1)) and np.all(np.isfinite(v2))):
        raise NonFiniteError("mean vectors must be finite")
    a, b = _check_pair(s1, s2)
    if v1.size != a.dim or v2.size != a.dim:
        raise DimMismatchError(
            f"mean lengths {v1.size}, {v2.size} do not match covariance dimension {a.dim}"
        )
    delta = v1 - v2
    return math.sqrt(float(delta @ delta) + procrustes_distance_squared(a, b))


def kernel_condition(s1, s2, rank_tol: float | None = None) -> bool:
    """Whether ker(S1) is contained in ker(S2) numerically.

    This is exactly the condition for an optimal transport map from S1 to S2
    to exist.  The numerical kernel of S1 collects eigenvalues at or below
    ``rank_tol * lambda_max(S1)``; the condition holds when the compression of
    S2 onto that kernel has operator norm at most ``rank_tol * (1 + tr S2)``.
    """
    a, b = _check_pair(s1, s2)
    values = a.spectrum.values
    cutoff = rank_cutoff(values, rank_tol)
    null_mask = values <= cutoff
    if not bool(null_mask.any()):
        return True
    v0 = a.spectrum.vectors[:, null_mask]
    leak = operator_norm(v0.T @ b.mat @ v0)
    rel = a.dim * EPS if rank_tol is None else float(rank_tol)
    return leak <= rel * (1.0 + b.trace)


def optimal_map(s1, s2, rank_tol: float | None = None) -> TransportMap:
    """Optimal transport map from S1 to S2.

    Computes ``S1^{-1/2} (S1^{1/2} S2 S1^{1/2})^{1/2} S1^{-1/2}`` with
    pseudo-inverse roots, extended as the identity on the numerical kernel of
    S1.  Raises ``KernelConditionError`` when ker(S1) is not contained in
    ker(S2), in which case no map exists.
    """
    a, b = _check_pair(s1, s2)
    if not kernel_condition(a, b, rank_tol):
        raise KernelConditionError(
            "kernel of the source covariance is not contained in the kernel of the target"
        )
    root = sqrt_psd(a).mat
    rinv = pinv_sqrt(a, rank_tol).mat
    mid = psd_product_root(root @ b.mat @ root)
    t = symmetrize(rinv @ mid @ rinv)
    values = a.spectrum.values
    cutoff = rank_cutoff(values, rank_tol)
    null_mask = values <= cutoff
    if bool(null_mask.any()):
        v0 = a.spectrum.vectors[:, null_mask]
        t = t + v0 @ v0.T
    rel = a.dim * EPS if rank_tol is None else float(rank_tol)
    return TransportMap(map=SymMatrix(t), source_rank_tol=rel)
