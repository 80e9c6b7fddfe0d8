import math

import numpy as np
import pytest

from bwgeom import (
    DimMismatchError,
    KernelConditionError,
    LeavesConeError,
    OutOfRangeError,
    geodesic,
    lift,
    log_map,
    mean_fixed_point,
    principal_geodesic,
    procrustes_distance,
    reconstruct,
    tangent_inner,
    tangent_pca,
)
from conftest import make_spd


def total_centred_variance(base, lifted):
    dirs = [tv.direction.mat for tv in lifted]
    abar = sum(dirs) / len(dirs)
    return sum(tangent_inner(base, a - abar, a - abar) for a in dirs) / len(dirs)


def test_lift_two_point_directions_are_opposite():
    fam = [np.diag([4.0, 1.0]), np.diag([1.0, 4.0])]
    mean = 2.25 * np.eye(2)
    lifted = lift(fam, mean)
    v0 = lifted[0].direction.mat
    v1 = lifted[1].direction.mat
    np.testing.assert_allclose(v0, np.diag([1.0 / 3.0, -1.0 / 3.0]), atol=1e-12)
    np.testing.assert_allclose(v0 + v1, 0.0, atol=1e-12)


def test_lift_reports_member_index_on_kernel_failure():
    fam = [np.diag([2.0, 0.0]), np.diag([0.0, 2.0])]
    with pytest.raises(KernelConditionError) as exc:
        lift(fam, np.diag([1.0, 0.0]))
    assert exc.value.index == 1


def test_lift_dimension_mismatch():
    with pytest.raises(DimMismatchError):
        lift([np.eye(3)], np.eye(2))


def test_two_point_family_single_exact_variance():
    fam = [np.diag([4.0, 1.0]), np.diag([1.0, 4.0])]
    mean = 2.25 * np.eye(2)
    res = tangent_pca(lift(fam, mean), mean, k=2)
    np.testing.assert_allclose(res.variances, [0.5, 0.0], atol=1e-12)
    assert len(res.components) == 1
    # scores are +-(distance / 2) and centred, sign set by the eigensolver
    assert res.scores.shape == (2, 1)
    np.testing.assert_allclose(np.abs(res.scores[:, 0]), math.sqrt(0.5), atol=1e-12)
    np.testing.assert_allclose(res.scores[:, 0].sum(), 0.0, atol=1e-12)
    assert res.lifted_mean_norm <= 1e-9


def test_identical_family_has_no_variance(rng):
    s = make_spd(4, rng)
    fam = [s, s, s]
    res = tangent_pca(lift(fam, s), s, k=3)
    assert np.all(res.variances <= 1e-10)


def test_geodesic_family_concentrates_on_one_component(rng):
    s0 = make_spd(3, rng)
    s1 = make_spd(3, rng)
    ts = np.linspace(0.0, 1.0, 6)
    fam = [geodesic(s0, s1, t) for t in ts]
    lifted = lift(fam, s0)
    res = tangent_pca(lifted, s0, k=5)
    v = log_map(s0, s1).direction.mat
    var = float(ts.var()) * tangent_inner(s0, v, v)
    assert res.variances[0] == pytest.approx(var, rel=1e-8)
    assert np.all(res.variances[1:] <= 1e-9 * res.variances[0])
    # scores along the single component are affine in the grid parameter
    fit = np.polynomial.polynomial.polyfit(ts, res.scores[:, 0], 1)
    np.testing.assert_allclose(
        np.polynomial.polynomial.polyval(ts, fit), res.scores[:, 0], atol=1e-8
    )


def test_components_orthonormal_under_tangent_metric(rng):
    fam = [make_spd(4, rng) for _ in range(6)]
    res = mean_fixed_point(fam)
    pca = tangent_pca(lift(fam, res.mean), res.mean, k=5)
    for a, ca in enumerate(pca.components):
        for b, cb in enumerate(pca.components):
            want = 1.0 if a == b else 0.0
            assert tangent_inner(res.mean, ca, cb) == pytest.approx(want, abs=1e-9)


def test_variances_account_for_total_and_scores(rng):
    fam = [make_spd(3, rng) for _ in range(5)]
    res = mean_fixed_point(fam)
    lifted = lift(fam, res.mean)
    pca = tangent_pca(lifted, res.mean, k=5)
    total = total_centred_variance(res.mean, lifted)
    assert float(pca.variances.sum()) == pytest.approx(total, rel=1e-9)
    n = len(fam)
    for a in range(pca.scores.shape[1]):
        col = pca.scores[:, a]
        assert float(col @ col) / n == pytest.approx(float(pca.variances[a]), rel=1e-8, abs=1e-12)
        assert col.sum() == pytest.approx(0.0, abs=1e-8)


def test_full_rank_reconstruction_recovers_members(rng):
    fam = [make_spd(4, rng) for _ in range(5)]
    res = mean_fixed_point(fam)
    pca = tangent_pca(lift(fam, res.mean), res.mean, k=5)
    for i, m in enumerate(fam):
        rec = reconstruct(res.mean, pca, i, k=len(pca.variances))
        err = procrustes_distance(rec, m)
        assert err <= 1e-7 * (1.0 + float(np.trace(m)))


def test_reconstruction_error_decreases_with_k(rng):
    fam = [make_spd(5, rng) for _ in range(7)]
    res = mean_fixed_point(fam)
    pca = tangent_pca(lift(fam, res.mean), res.mean, k=7)
    for i in range(len(fam)):
        errs = [
            procrustes_distance(reconstruct(res.mean, pca, i, k=k), fam[i])
            for k in range(len(pca.components) + 1)
        ]
        for lo, hi in zip(errs[1:], errs[:-1]):
            assert lo <= hi + 1e-7


def test_reconstruct_with_no_components_returns_lift_mean_point(rng):
    fam = [np.diag([4.0, 1.0]), np.diag([1.0, 4.0])]
    mean = 2.25 * np.eye(2)
    pca = tangent_pca(lift(fam, mean), mean, k=2)
    rec = reconstruct(mean, pca, 0, k=0)
    np.testing.assert_allclose(np.asarray(rec), mean, atol=1e-9)


def test_principal_geodesic_matches_closed_form():
    base = np.eye(2)
    comp = np.diag([1.0, -1.0]) / math.sqrt(2.0)
    assert np.allclose(np.asarray(principal_geodesic(base, comp, 0.0)), base)
    got = principal_geodesic(base, comp, 0.5)
    a = (1.0 + 0.5 / math.sqrt(2.0)) ** 2
    b = (1.0 - 0.5 / math.sqrt(2.0)) ** 2
    np.testing.assert_allclose(np.asarray(got), np.diag([a, b]), atol=1e-12)


def test_principal_geodesic_reports_admissible_interval():
    base = np.eye(2)
    comp = np.diag([1.0, -1.0]) / math.sqrt(2.0)
    with pytest.raises(LeavesConeError) as exc:
        principal_geodesic(base, comp, 2.0)
    lo, hi = exc.value.interval
    assert lo == pytest.approx(-math.sqrt(2.0))
    assert hi == pytest.approx(math.sqrt(2.0))
    assert exc.value.lambda_min == pytest.approx(1.0 - math.sqrt(2.0))


def test_tangent_pca_rejects_bad_k(rng):
    fam = [make_spd(3, rng) for _ in range(4)]
    mean = mean_fixed_point(fam).mean
    lifted = lift(fam, mean)
    with pytest.raises(OutOfRangeError):
        tangent_pca(lifted, mean, k=0)
    with pytest.raises(OutOfRangeError):
        tangent_pca(lifted, mean, k=5)


def test_reconstruct_rejects_bad_arguments(rng):
    fam = [make_spd(3, rng) for _ in range(4)]
    mean = mean_fixed_point(fam).mean
    pca = tangent_pca(lift(fam, mean), mean, k=3)
    with pytest.raises(OutOfRangeError):
        reconstruct(mean, pca, 4, k=1)
    with pytest.raises(OutOfRangeError):
        reconstruct(mean, pca, 0, k=7)
