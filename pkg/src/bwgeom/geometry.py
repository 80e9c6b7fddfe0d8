"""Tangent-space calculus on the cone of PSD matrices.

The tangent space at a covariance S consists of symmetric matrices A with
inner product tr(A S B).  The exponential map sends A to (I + A) S (I + A);
its inverse at injective base points is the optimal transport map minus the
identity.  Geodesics are McCann interpolations, evaluated in the factored form
(I + t A) S0 (I + t A) which is PSD by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bures import optimal_map
from .errors import DimMismatchError, LeavesConeError, OutOfRangeError
from .spectral import (
    Covariance,
    SymMatrix,
    cov_from_product,
    default_psd_tol,
    validate_psd,
)


@dataclass(frozen=True)
class TangentVector:
    """Symmetric direction attached to a base covariance."""

    base: Covariance
    direction: SymMatrix


def _direction(base: Covariance, a) -> np.ndarray:
    d = SymMatrix(a)
    if d.dim != base.dim:
        raise DimMismatchError(
            f"tangent direction dimension {d.dim} does not match base dimension {base.dim}"
        )
    return d.mat


def tangent_inner(base, a, b) -> float:
    """Inner product tr(A S B) of two tangent directions at the base point."""
    s = validate_psd(base)
    am = _direction(s, a)
    bm = _direction(s, b)
    return float(np.trace(am @ s.mat @ bm))


def tangent_norm(base, a) -> float:
    """Norm induced by ``tangent_inner``; tiny negative roundoff is clamped."""
    return math.sqrt(max(0.0, tangent_inner(base, a, a)))


def exp_map(base, a) -> Covariance:
    """Exponential map (I + A) S (I + A) at the base covariance S.

    Raises ``LeavesConeError`` when I + A has an eigenvalue below the PSD
    tolerance, since the step then folds through the boundary of the cone and
    no longer corresponds to a transport map.
    """
    s = validate_psd(base)
    am = _direction(s, a)
    b = np.eye(s.dim) + am
    w = np.linalg.eigvalsh(b)
    if w[0] < -default_psd_tol(w):
        raise LeavesConeError(lambda_min=float(w[0]))
    return cov_from_product(b @ s.mat @ b)


def log_map(base, target, rank_tol: float | None = None) -> TangentVector:
    """Logarithm of ``target`` at ``base``: the transport map minus the identity."""
    s = validate_psd(base)
    t = optimal_map(s, target, rank_tol)
    return TangentVector(base=s, direction=SymMatrix(t.map.mat - np.eye(s.dim)))


def geodesic(s0, s1, t: float, rank_tol: float | None = None) -> Covariance:
    """Point at parameter ``t`` on the geodesic from S0 to S1.

    Evaluated as (I + t A) S0 (I + t A) with A the logarithm of S1 at S0, so
    the result is PSD by construction.  ``t`` must lie in [0, 1]; the curve has
    constant speed, with distance (t - s) times the endpoint distance between
    parameters s <= t.
    """
    if not 0.0 <= float(t) <= 1.0:
        raise OutOfRangeError(f"geodesic parameter t={t} outside [0, 1]")
    a = validate_psd(s0)
    direction = log_map(a, s1, rank_tol).direction.mat
    b = np.eye(a.dim) + float(t) * direction
    return cov_from_product(b @ a.mat @ b)
