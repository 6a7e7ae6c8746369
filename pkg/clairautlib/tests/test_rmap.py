"""Tests for Riemannian maps."""

import math

import numpy as np
import pytest

from clairautlib import rmap as R
from clairautlib.geometry import inner, sample_points
from clairautlib.manifest import load_manifest
from clairautlib.testing import (
    euclidean, fd_second_fundamental_form, linear_map, random_riemannian_map,
)


def example_map(name):
    return load_manifest(name).maps['pi']


def domain_points(smooth_map, count=5, seed=0):
    rng = np.random.default_rng(seed)
    return sample_points(smooth_map.domain_manifold.domain, count, rng)


def assert_same_span(frame, expected, metric):
    """Every vector of ``expected`` lies in span(frame) and vice versa."""
    P = R.projector(frame, metric)
    for v in expected:
        v = np.asarray(v, dtype=float)
        np.testing.assert_allclose(P @ v, v, atol=1e-10)
    assert len(frame) == len(expected)


def test_example_3_1_decomposition():
    smooth_map = example_map('example_3_1')
    for p in domain_points(smooth_map):
        local = R.local_data(smooth_map, p)
        decomposition = local.decomposition
        assert decomposition.rank == 1
        assert decomposition.proper
        assert_same_span(decomposition.ker_frame, [[1, -1, 0], [0, 0, 1]],
                         local.g1)
        assert_same_span(decomposition.hker_frame, [[1, 1, 0]], local.g1)
        assert_same_span(decomposition.range_frame, [[0, 1, 0]], local.g2)
        # range vectors are pushforwards of their horizontal partners
        np.testing.assert_allclose(
            local.push(decomposition.hker_frame[0]),
            decomposition.range_frame[0], atol=1e-12)


def test_example_3_2_decomposition():
    smooth_map = example_map('example_3_2')
    for p in domain_points(smooth_map):
        local = R.local_data(smooth_map, p)
        decomposition = local.decomposition
        assert decomposition.rank == 1
        assert_same_span(decomposition.ker_frame, [[1, 1, 0], [0, 0, 1]],
                         local.g1)
        assert_same_span(decomposition.rperp_frame, [[1, 0, 0], [0, 0, 1]],
                         local.g2)
        stacked = np.array(decomposition.rperp_frame)
        np.testing.assert_allclose(
            stacked @ local.g2 @ stacked.T, np.eye(2), atol=1e-12)


@pytest.mark.parametrize("name", ['example_3_1', 'example_3_2'])
def test_examples_are_riemannian(name):
    smooth_map = example_map(name)
    for p in domain_points(smooth_map):
        assert R.isometry_residual(smooth_map, p) < 1e-10


def test_non_riemannian_map():
    M, B = euclidean('M', ('x', 'y')), euclidean('B', ('u', 'v'))
    smooth_map = linear_map('stretch', M, B, [[2.0, 0.0], [0.0, 0.0]])
    assert R.isometry_residual(smooth_map, [0.1, 0.2]) == pytest.approx(3.0)


def test_example_3_2_second_fundamental_form():
    smooth_map = example_map('example_3_2')
    Z = np.array([1.0, -1.0, 0.0]) / math.sqrt(2)
    for p in domain_points(smooth_map):
        v = (p[0] - p[1]) / math.sqrt(2)
        np.testing.assert_allclose(
            R.second_fundamental_form(smooth_map, p, Z, Z),
            [-v, 0.0, -1.0 - v * v], atol=1e-12)


def test_example_3_1_is_totally_geodesic():
    smooth_map = example_map('example_3_1')
    for p in domain_points(smooth_map):
        local = R.local_data(smooth_map, p)
        assert np.max(np.abs(local.sff)) < 1e-12


@pytest.mark.parametrize("name", ['example_3_1', 'example_3_2'])
def test_second_fundamental_form_matches_finite_differences(name):
    smooth_map = example_map(name)
    rng = np.random.default_rng(4)
    for p in domain_points(smooth_map, count=3):
        W, Z = rng.standard_normal(3), rng.standard_normal(3)
        np.testing.assert_allclose(
            R.second_fundamental_form(smooth_map, p, W, Z),
            fd_second_fundamental_form(smooth_map, p, W, Z), atol=1e-6)


def test_lemma21_on_random_riemannian_maps():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        smooth_map = random_riemannian_map(rng)
        p = rng.uniform(-1.0, 1.0, 3)
        assert R.isometry_residual(smooth_map, p) < 1e-10
        assert R.lemma21_residual(smooth_map, p) < 1e-10


def test_random_riemannian_map_rank():
    rng = np.random.default_rng(9)
    smooth_map = random_riemannian_map(rng, m=4, b=6, rank=2)
    decomposition = R.decompose(smooth_map, rng.uniform(-1.0, 1.0, 4))
    assert decomposition.rank == 2
    assert len(decomposition.ker_frame) == 2
    assert len(decomposition.rperp_frame) == 4


def test_shape_operator_is_adjoint_of_second_fundamental_form():
    smooth_map = example_map('example_3_2')
    p = domain_points(smooth_map, count=1)[0]
    local = R.local_data(smooth_map, p)
    V = local.decomposition.rperp_frame[1]
    X = local.decomposition.range_frame[0]
    W = local.decomposition.hker_frame[0]
    A = R.apply_shape_operator(local, V, X)
    assert inner(local.g2, A, X) == pytest.approx(
        inner(local.g2, V, local.second_fundamental_form(W, W)), abs=1e-12)
    matrix = R.shape_operator(smooth_map, p, V)
    assert matrix.shape == (1, 1)


def test_shape_operator_needs_perpendicular_vector():
    smooth_map = example_map('example_3_2')
    p = domain_points(smooth_map, count=1)[0]
    with pytest.raises(R.NonOrthogonalVectorError):
        R.shape_operator(smooth_map, p, [0.0, 1.0, 0.0])


def test_umbilical_fit():
    smooth_map = example_map('example_3_2')
    for p in domain_points(smooth_map):
        H2, misfit = R.umbilical_fit(smooth_map, p)
        v = (p[0] - p[1]) / math.sqrt(2)
        np.testing.assert_allclose(H2, [-v, 0.0, -1.0 - v * v], atol=1e-12)
        assert misfit < 1e-12


def test_umbilical_fit_of_rank_zero_map():
    M, B = euclidean('M', ('x', 'y')), euclidean('B', ('u', 'v'))
    smooth_map = linear_map('constant', M, B, [[0.0, 0.0], [0.0, 0.0]])
    with pytest.raises(R.EmptyDistributionError):
        R.umbilical_fit(smooth_map, [0.0, 0.0])


def test_harmonicity():
    smooth_map = example_map('example_3_2')
    points = domain_points(smooth_map)
    report = R.harmonicity_report(smooth_map, points)
    assert not report.harmonic
    assert report.max('umbilical_identity_residual') < 1e-7
    for entry in report.points:
        v = (entry.point[0] - entry.point[1]) / math.sqrt(2)
        H2 = np.array([-v, 0.0, -1.0 - v * v])
        g2 = R.local_data(smooth_map, entry.point).g2
        assert entry.trace_identity_residual == pytest.approx(
            math.sqrt(inner(g2, H2, H2)), rel=1e-9)

    totally_geodesic = example_map('example_3_1')
    assert R.harmonicity_report(
        totally_geodesic, domain_points(totally_geodesic)).harmonic


def test_mean_curvature_of_flat_kernel():
    smooth_map = example_map('example_3_2')
    p = domain_points(smooth_map, count=1)[0]
    np.testing.assert_allclose(
        R.mean_curvature(smooth_map, p, 'vertical'), np.zeros(3), atol=1e-14)
    with pytest.raises(ValueError):
        R.mean_curvature(smooth_map, p, 'sideways')


def test_image_outside_domain():
    smooth_map = example_map('example_3_2')
    # x == y lands on the excluded plane v = 0
    with pytest.raises(R.ImageOutsideDomainError):
        R.map_jet(smooth_map, [1.0, 1.0, 0.0])


def test_rank_threshold_warning():
    M, B = euclidean('M', ('x', 'y')), euclidean('B', ('u', 'v'))
    smooth_map = linear_map('nearly_singular', M, B, [[1.0, 0.0], [0.0, 1e-8]])
    with pytest.warns(R.RankThresholdWarning):
        R.decompose(smooth_map, [0.0, 0.0])


def test_components_must_match_codomain():
    M, B = euclidean('M', ('x', 'y')), euclidean('B', ('u', 'v', 'w'))
    with pytest.raises(ValueError):
        linear_map('short', M, B, [[1.0, 0.0], [0.0, 1.0]])
