"""Frechet means of covariance families and the induced multicoupling.

Two solvers are provided.  ``mean_fixed_point`` iterates

    S_{k+1} = T_k S_k T_k,   T_k = (1/N) sum_i optimal_map(S_k, S_i),

a steepest-descent scheme whose functional values are non-increasing and whose
iterate traces are non-decreasing.  ``mean_procrustes_averaging`` alternates
orthogonal alignment of the matrix roots with averaging of the aligned roots.
Both expose the same diagnostics through ``MeanResult``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bures import optimal_map, procrustes_distance_squared
from .errors import (
    DimMismatchError,
    EmptyFamilyError,
    KernelConditionError,
    MaxIterExceeded,
    OutOfRangeError,
)
from .spectral import (
    EPS,
    Covariance,
    SymMatrix,
    cov_from_product,
    operator_norm,
    psd_product_root,
    rank_cutoff,
    sqrt_psd,
    sym_eigen,
    symmetrize,
    trace_norm,
    validate_psd,
)

# Residual certificate required of a converged mean, relative to 1 + trace.
RESIDUAL_CERT = 1e-6


@dataclass(frozen=True)
class MeanConfig:
    """Solver configuration.

    ``rel_tol`` applies to the relative change of the Frechet functional in the
    descent solver and to the Hilbert-Schmidt change of the average root in the
    averaging solver.  ``init`` selects the starting point of the descent
    solver: ``"euclidean_mean"``, ``"root_mean_square"`` (the squared average
    of the matrix roots), or an explicit PSD matrix.
    """

    max_iter: int = 200
    rel_tol: float = 1e-9
    init: object = "euclidean_mean"

    def __post_init__(self):
        if self.max_iter < 1:
            raise OutOfRangeError(f"max_iter={self.max_iter} must be at least 1")
        if not self.rel_tol > 0.0:
            raise OutOfRangeError(f"rel_tol={self.rel_tol} must be positive")


@dataclass(frozen=True)
class MeanResult:
    """Mean with per-iterate diagnostics.

    ``functional_trace`` and ``residual_trace`` have one entry per evaluated
    point, the starting point included, so ``iterations ==
    len(functional_trace) - 1``.  ``trace_of_iterates`` and
    ``min_eig_of_iterates`` cover only the iterates the solver itself produced
    (one entry per step); the descent solver's trace sequence is non-decreasing
    while its functional sequence, starting point included, is non-increasing.
    On a deflated (common-kernel) run the minimum eigenvalues are measured on
    the reduced problem.
    """

    mean: Covariance
    iterations: int
    functional_trace: np.ndarray
    residual_trace: np.ndarray
    trace_of_iterates: np.ndarray
    min_eig_of_iterates: np.ndarray
    converged: bool
    algorithm: str


@dataclass(frozen=True)
class JointCovariance:
    """Covariance of the optimal multicoupling, stored blockwise.

    ``blocks[i, j]`` is the d x d cross-covariance of members i and j; the
    full (n d) x (n d) matrix is PSD with the family members on the diagonal.
    """

    n: int
    dim: int
    blocks: np.ndarray

    def block(self, i: int, j: int) -> np.ndarray:
        return self.blocks[i, j]

    def full(self) -> np.ndarray:
        n, d = self.n, self.dim
        out = np.empty((n * d, n * d))
        for i in range(n):
            for j in range(n):
                out[i * d : (i + 1) * d, j * d : (j + 1) * d] = self.blocks[i, j]
        return out


def coerce_family(family) -> list[Covariance]:
    """Validate a family of covariances and check dimensions agree."""
    members = [validate_psd(m) for m in family]
    if not members:
        raise EmptyFamilyError("family of covariances is empty")
    d = members[0].dim
    for i, m in enumerate(members):
        if m.dim != d:
            raise DimMismatchError(f"family member {i} has dimension {m.dim}, expected {d}")
    return members


def frechet_functional(s, family) -> float:
    """F(S) = (1/2N) sum_i d^2(S, S_i) for the Procrustes distance d."""
    c = validate_psd(s)
    members = coerce_family(family)
    if c.dim != members[0].dim:
        raise DimMismatchError(f"candidate dimension {c.dim} does not match family {members[0].dim}")
    total = sum(procrustes_distance_squared(c, m) for m in members)
    return total / (2.0 * len(members))


def fixed_point_residual(s, family) -> float:
    """Trace-norm residual of the barycenter fixed-point equation.

    Returns ``|| S - (1/N) sum_i (S^{1/2} S_i S^{1/2})^{1/2} ||_1``, which
    vanishes exactly at the Frechet mean of the family.
    """
    c = validate_psd(s)
    members = coerce_family(family)
    if c.dim != members[0].dim:
        raise DimMismatchError(f"candidate dimension {c.dim} does not match family {members[0].dim}")
    root = sqrt_psd(c).mat
    acc = np.zeros_like(root)
    for m in members:
        acc += psd_product_root(root @ m.mat @ root)
    acc /= len(members)
    return trace_norm(c.mat - acc)


def _resolve_init(cfg: MeanConfig, members: list[Covariance]) -> np.ndarray:
    if isinstance(cfg.init, str):
        if cfg.init == "euclidean_mean":
            return sum(m.mat for m in members) / len(members)
        if cfg.init == "root_mean_square":
            root_avg = sum(sqrt_psd(m).mat for m in members) / len(members)
            return root_avg @ root_avg
        raise OutOfRangeError(f"unknown init {cfg.init!r}")
    return validate_psd(cfg.init).mat


def _member_factors(mats, rank_tol):
    """Exact-rank factors L with m = L @ L.T, or None for full-rank members.

    Evaluating a rank-deficient member through its factor avoids the spurious
    near-zero eigenvalues of root @ m @ root, whose clamped square roots are
    the dominant roundoff in the functional near the fixed point.
    """
    factors = []
    for m in mats:
        spec = sym_eigen(m)
        keep = spec.values > rank_cutoff(spec.values, rank_tol)
        factors.append(None if bool(keep.all()) else spec.vectors[:, keep] * np.sqrt(spec.values[keep]))
    return factors


class _Evaluation:
    """Descent-solver quantities at one iterate, sharing a single root."""

    __slots__ = ("functional", "residual", "trace", "lam_min", "step_map")

    def __init__(self, cur, members, member_traces, factors, rank_tol, iterate_index):
        spec = sym_eigen(cur)
        w, v = spec.values, spec.vectors
        cutoff = rank_cutoff(w, rank_tol)
        null_mask = w <= cutoff
        rel = w.size * EPS if rank_tol is None else float(rank_tol)
        wc = np.maximum(w, 0.0)
        root = symmetrize((v * np.sqrt(wc)) @ v.T)
        inv = np.zeros_like(w)
        inv[~null_mask] = 1.0 / np.sqrt(w[~null_mask])
        rinv = symmetrize((v * inv) @ v.T)
        v0 = v[:, null_mask] if bool(null_mask.any()) else None

        tr_cur = float(np.trace(cur))
        f = 0.0
        gsum = np.zeros_like(cur)
        for i, m in enumerate(members):
            if v0 is not None:
                leak = operator_norm(v0.T @ m @ v0)
                if leak > rel * (1.0 + member_traces[i]):
                    raise KernelConditionError(
                        f"iterate {iterate_index} lost range inclusion for member {i}",
                        index=iterate_index,
                    )
            l = factors[i]
            if l is None:
                g = psd_product_root(root @ m @ root)
                tr_g = float(np.trace(g))
            else:
                # (B B^T)^{1/2} = B (B^T B)^{-1/2} B^T with B = root @ L.
                b = root @ l
                inner = sym_eigen(b.T @ b)
                pos = inner.values > rank_cutoff(inner.values, rank_tol)
                tr_g = float(np.sqrt(inner.values[pos]).sum())
                scale = np.where(pos, 1.0 / np.sqrt(np.where(pos, inner.values, 1.0)), 0.0)
                g = symmetrize(b @ ((inner.vectors * scale) @ inner.vectors.T) @ b.T)
            f += max(0.0, tr_cur + member_traces[i] - 2.0 * tr_g)
            gsum += g
        gbar = gsum / len(members)

        self.functional = f / (2.0 * len(members))
        self.residual = trace_norm(cur - gbar)
        self.trace = tr_cur
        self.lam_min = float(w[-1])
        step = symmetrize(rinv @ gbar @ rinv)
        if v0 is not None:
            step = step + v0 @ v0.T
        self.step_map = step


def _result(mean_mat, embed, fs, residuals, traces, min_eigs, converged, algorithm):
    mean = cov_from_product(embed(mean_mat))
    freeze = lambda xs: np.asarray(xs, dtype=np.float64)
    return MeanResult(
        mean=mean,
        iterations=len(fs) - 1,
        functional_trace=freeze(fs),
        residual_trace=freeze(residuals),
        trace_of_iterates=freeze(traces),
        min_eig_of_iterates=freeze(min_eigs),
        converged=converged,
        algorithm=algorithm,
    )


def mean_fixed_point(family, cfg: MeanConfig | None = None, rank_tol: float | None = None) -> MeanResult:
    """Frechet mean by the transport-map descent iteration.

    Families with a common numerical kernel are deflated to its orthogonal
    complement before solving and the mean is embedded back afterwards.  The
    solver stops once the relative change of the functional falls below
    ``cfg.rel_tol`` and the fixed-point residual certifies optimality within
    ``max(cfg.rel_tol, 1e-6) * (1 + trace)``; hitting ``cfg.max_iter`` first
    raises ``MaxIterExceeded`` carrying the best iterate.
    """
    cfg = cfg or MeanConfig()
    members = coerce_family(family)
    d = members[0].dim

    # Deflate the common kernel, read off the euclidean mean's null space.
    esum = cov_from_product(sum(m.mat for m in members) / len(members))
    evals = esum.spectrum.values
    cut = rank_cutoff(evals, rank_tol)
    rank = int(np.sum(evals > cut))
    if rank == 0:
        zero = np.zeros((d, d))
        zmean = validate_psd(zero)
        f0 = frechet_functional(zmean, members)
        r0 = fixed_point_residual(zmean, members)
        return _result(zero, lambda m: m, [f0], [r0], [], [], True, "fixed_point")
    if rank < d:
        q = esum.spectrum.vectors[:, :rank]
        mats = [symmetrize(q.T @ m.mat @ q) for m in members]
        embed = lambda m: q @ m @ q.T
    else:
        mats = [m.mat for m in members]
        embed = lambda m: m
    member_traces = [float(np.trace(m)) for m in mats]
    factors = _member_factors(mats, rank_tol)

    cur = _resolve_init(cfg, [cov_from_product(m) for m in mats])
    ev = _Evaluation(cur, mats, member_traces, factors, rank_tol, 0)
    fs: list[float] = [ev.functional]
    residuals: list[float] = [ev.residual]
    traces: list[float] = []
    min_eigs: list[float] = []
    res_cert = max(cfg.rel_tol, RESIDUAL_CERT)

    def certified(e, scale):
        return e.residual <= scale * (1.0 + e.trace)

    if certified(ev, cfg.rel_tol):
        return _result(cur, embed, fs, residuals, traces, min_eigs, True, "fixed_point")
    for k in range(1, cfg.max_iter + 1):
        nxt = symmetrize(ev.step_map @ cur @ ev.step_map)
        cand = _Evaluation(nxt, mats, member_traces, factors, rank_tol, k)
        improvement = ev.functional - cand.functional
        if improvement < 0.0 and certified(ev, res_cert):
            # The step no longer lowers the functional: evaluation roundoff
            # dominates and the residual already certifies the current iterate.
            return _result(cur, embed, fs, residuals, traces, min_eigs, True, "fixed_point")
        cur, ev = nxt, cand
        fs.append(ev.functional)
        residuals.append(ev.residual)
        traces.append(ev.trace)
        min_eigs.append(ev.lam_min)
        settled = 0.0 <= improvement <= cfg.rel_tol * max(fs[-2], fs[-1], 1e-30)
        if certified(ev, cfg.rel_tol) or (settled and certified(ev, res_cert)):
            return _result(cur, embed, fs, residuals, traces, min_eigs, True, "fixed_point")
    raise MaxIterExceeded(
        _result(cur, embed, fs, residuals, traces, min_eigs, False, "fixed_point")
    )


def pairwise_alignment(l1, l2) -> np.ndarray:
    """Orthogonal R maximizing tr(R.T @ L2.T @ L1), aligning L2 toward L1.

    R is the orthogonal polar factor of ``L2.T @ L1`` (via SVD); the achieved
    value of the trace is the trace norm of ``L2.T @ L1``.
    """
    a1 = np.asarray(l1, dtype=np.float64)
    a2 = np.asarray(l2, dtype=np.float64)
    if a1.shape != a2.shape or a1.ndim != 2 or a1.shape[0] != a1.shape[1]:
        raise DimMismatchError(f"expected square factors of equal shape, got {a1.shape} and {a2.shape}")
    w, _, vt = np.linalg.svd(a2.T @ a1)
    return w @ vt


def mean_procrustes_averaging(family, cfg: MeanConfig | None = None) -> MeanResult:
    """Frechet mean by generalized Procrustes averaging of matrix roots.

    Each member's root is rotated toward the current average root, the average
    is recomputed, and the loop stops when the average root moves less than
    ``cfg.rel_tol * (1 + ||average||_HS)`` in Hilbert-Schmidt norm.  The mean
    is the squared final average.  ``cfg.init`` is ignored: this scheme always
    starts from the average of the roots themselves.
    """
    cfg = cfg or MeanConfig()
    members = coerce_family(family)
    mats = [m.mat for m in members]
    aligned = [sqrt_psd(m).mat.copy() for m in members]
    avg = sum(aligned) / len(aligned)

    fs: list[float] = []
    residuals: list[float] = []
    traces: list[float] = []
    min_eigs: list[float] = []

    def record(a, produced):
        mean_k = cov_from_product(a @ a.T)
        fs.append(frechet_functional(mean_k, members))
        residuals.append(fixed_point_residual(mean_k, members))
        if produced:
            traces.append(mean_k.trace)
            min_eigs.append(float(mean_k.spectrum.values[-1]))

    record(avg, produced=False)
    for k in range(1, cfg.max_iter + 1):
        for i, l in enumerate(aligned):
            aligned[i] = l @ pairwise_alignment(avg, l)
        prev = avg
        avg = sum(aligned) / len(aligned)
        record(avg, produced=True)
        if float(np.linalg.norm(avg - prev)) <= cfg.rel_tol * (1.0 + float(np.linalg.norm(avg))):
            return _result(avg @ avg.T, lambda m: m, fs, residuals, traces, min_eigs, True,
                           "procrustes_averaging")
    raise MaxIterExceeded(
        _result(avg @ avg.T, lambda m: m, fs, residuals, traces, min_eigs, False,
                "procrustes_averaging")
    )


def multicoupling(mean, family, rank_tol: float | None = None) -> JointCovariance:
    """Covariance of the optimal multicoupling induced by transport from the mean.

    With t_i the optimal map from the mean to member i, block (i, j) is
    ``t_i @ mean @ t_j``; the diagonal blocks reproduce the family members and
    the full matrix is PSD by construction.
    """
    c = validate_psd(mean)
    members = coerce_family(family)
    if c.dim != members[0].dim:
        raise DimMismatchError(f"mean dimension {c.dim} does not match family {members[0].dim}")
    maps = []
    for i, m in enumerate(members):
        try:
            maps.append(optimal_map(c, m, rank_tol).map.mat)
        except KernelConditionError as e:
            raise KernelConditionError(
                "no transport map from the mean to a family member", index=i
            ) from e
    n, d = len(members), c.dim
    blocks = np.empty((n, n, d, d))
    for i in range(n):
        left = maps[i] @ c.mat
        for j in range(i, n):
            b = left @ maps[j]
            blocks[i, j] = b
            blocks[j, i] = b.T
    return JointCovariance(n=n, dim=d, blocks=blocks)


def multicoupling_cost(joint: JointCovariance) -> float:
    """Average pairwise squared-distance cost (1/2N^2) sum_{i<j} E||Y_i - Y_j||^2.

    At the Frechet mean this equals the Frechet functional of the family.
    """
    n = joint.n
    total = 0.0
    for i in range(n):
        tii = float(np.trace(joint.blocks[i, i]))
        for j in range(i + 1, n):
            tjj = float(np.trace(joint.blocks[j, j]))
            tij = float(np.trace(joint.blocks[i, j]))
            total += tii + tjj - 2.0 * tij
    return total / (2.0 * n * n)
