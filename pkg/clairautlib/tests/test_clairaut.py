"""Tests for anti-invariance, Clairaut geodesics and the residual checks."""

import math

import numpy as np
import pytest

from clairautlib import clairaut as K
from clairautlib import geometry
from clairautlib.expr import parse_expr
from clairautlib.manifest import load_manifest
from clairautlib.rmap import NonOrthogonalVectorError, local_data
from clairautlib.testing import (
    euclidean, flat_cosymplectic, linear_map, sasakian_example,
)


@pytest.fixture(scope='module')
def ex31():
    return load_manifest('example_3_1')


@pytest.fixture(scope='module')
def ex32():
    return load_manifest('example_3_2')


@pytest.fixture(scope='module')
def flat():
    return load_manifest('flat_cosymplectic')


def domain_points(smooth_map, count=5, seed=0):
    rng = np.random.default_rng(seed)
    return geometry.sample_points(smooth_map.domain_manifold.domain, count, rng)


def domain_geodesic(smooth_map, p, v, length=0.2, step=0.01):
    domain = smooth_map.domain_manifold
    v = np.asarray(v, dtype=float)
    v = v / geometry.norm(geometry.metric_at(domain, p), v)
    return geometry.integrate_geodesic(domain, p, v, length, step)


def test_anti_invariance_of_examples(ex31, ex32):
    for manifest, structure in ((ex31, 'sasakian'), (ex32, 'trans_sasakian')):
        smooth_map = manifest.maps['pi']
        for p in domain_points(smooth_map):
            split = K.anti_invariance_check(
                smooth_map, manifest.structures[structure], p)
            assert split.is_anti_invariant
            assert split.reeb_position == 'horizontal'
            assert len(split.psi_range_frame) == 1
            assert len(split.mu_frame) == 1
            assert split.mu_invariance_residual < 1e-10
            assert abs(split.gram_determinant - 1.0) < 1e-10


def test_identity_map_is_not_anti_invariant():
    structure = sasakian_example()
    chart = structure.manifold
    smooth_map = linear_map('identity', chart, chart, np.eye(3))
    split = K.anti_invariance_check(smooth_map, structure, [0.2, 0.1, 0.5])
    assert not split.is_anti_invariant
    assert split.reeb_position == 'vertical'


def test_structure_must_live_on_codomain(ex31, ex32):
    with pytest.raises(K.StructureMismatchError):
        K.anti_invariance_check(ex31.maps['pi'],
                                ex32.structures['trans_sasakian'],
                                domain_points(ex31.maps['pi'], 1)[0])


def test_bc_split(ex32):
    smooth_map = ex32.maps['pi']
    structure = ex32.structures['trans_sasakian']
    for p in domain_points(smooth_map):
        split = K.anti_invariance_check(smooth_map, structure, p)
        g = split.metric
        for V in split.rperp_frame:
            BV, CV = K.bc_split(split, V)
            np.testing.assert_allclose(split.range_projector @ BV, BV,
                                       atol=1e-12)
            assert geometry.inner(g, BV, CV) == pytest.approx(0.0, abs=1e-12)
            image = split.psi @ V
            assert (geometry.inner(g, BV, BV) + geometry.inner(g, CV, CV)
                    == pytest.approx(geometry.inner(g, image, image)))
        # psi of psi(range) lands back in range
        R = split.range_frame[0]
        BV, CV = K.bc_split(split, split.psi @ R)
        np.testing.assert_allclose(BV, -R, atol=1e-12)
        np.testing.assert_allclose(CV, np.zeros(3), atol=1e-12)


def test_bc_split_rejects_range_vectors(ex32):
    smooth_map = ex32.maps['pi']
    split = K.anti_invariance_check(smooth_map, ex32.structures['trans_sasakian'],
                                    domain_points(smooth_map, 1)[0])
    with pytest.raises(NonOrthogonalVectorError):
        K.bc_split(split, split.range_frame[0])


def test_anti_invariance_does_not_depend_on_range_frame(flat):
    smooth_map = flat.maps['pi']
    structure = flat.structures['cosymplectic']
    p = domain_points(smooth_map, 1)[0]
    computed = K.anti_invariance_check(smooth_map, structure, p)
    angle = 0.7
    rotated = [np.array([math.cos(angle), math.sin(angle), 0, 0, 0]),
               np.array([-math.sin(angle), math.cos(angle), 0, 0, 0])]
    given = K.anti_invariance_check(smooth_map, structure, p,
                                    range_frame=rotated)
    assert given.residual == pytest.approx(computed.residual, abs=1e-14)
    # mu is spanned by xi either way
    for split in (given, computed):
        xi = structure.xi.at(split.point)
        assert abs(geometry.inner(split.metric, split.mu_frame[0], xi)) == \
            pytest.approx(1.0)


def test_declared_split_matches_computed_frames(ex31, ex32):
    for manifest, name in ((ex31, 'frames'), (ex32, 'consistent'),
                           (ex32, 'printed')):
        split = manifest.splits[name]
        mismatch = K.validate_declared_split(
            split, domain_points(split.smooth_map))
        assert mismatch < 1e-10


def test_declared_split_mismatch(ex32):
    smooth_map = ex32.maps['pi']
    coords = smooth_map.codomain_manifold.coords
    wrong = K.DeclaredSplit(
        name='wrong', smooth_map=smooth_map,
        range_fields=[geometry.VectorFieldSpec.parse(['1', '0', '0'], coords)],
        perp_fields=[geometry.VectorFieldSpec.parse(['0', '1', '0'], coords),
                     geometry.VectorFieldSpec.parse(['0', '0', '1'], coords)])
    with pytest.raises(K.FrameMismatchError):
        K.validate_declared_split(wrong, domain_points(smooth_map, 1))


def test_declared_split_needs_independent_fields(ex32):
    smooth_map = ex32.maps['pi']
    coords = smooth_map.codomain_manifold.coords
    dependent = K.DeclaredSplit(
        name='dependent', smooth_map=smooth_map,
        range_fields=[geometry.VectorFieldSpec.parse(['0', '1', '0'], coords)],
        perp_fields=[geometry.VectorFieldSpec.parse(['0', '0', '1'], coords),
                     geometry.VectorFieldSpec.parse(['0', '0', '2'], coords)])
    with pytest.raises(K.FrameSpanError):
        dependent.at([0.0, 1.0, 0.0])


def test_declared_split_field_count(ex32):
    smooth_map = ex32.maps['pi']
    coords = smooth_map.codomain_manifold.coords
    with pytest.raises(ValueError):
        K.DeclaredSplit(
            name='short', smooth_map=smooth_map,
            range_fields=[geometry.VectorFieldSpec.parse(['0', '1', '0'], coords)],
            perp_fields=[])


def heisenberg_components(point, velocity):
    """Components of a velocity of B in the frame e1, e2, e3 = xi.

    ``e1 = 2 (d/du + v d/dw)`` and ``e2 = 2 d/dv`` with ``[e1, e2] = -2 e3``.
    Along a geodesic c is constant and (a, b) turn at rate ``-2c``.
    """
    a = velocity[0] / 2
    return a, velocity[1] / 2, velocity[2] / 2 - a * point[1]


def test_clairaut_invariant_is_conserved_along_range_geodesics(ex31):
    smooth_map = ex31.maps['pi']
    rng = np.random.default_rng(0)
    starts = K.domain_starts(smooth_map, 5, rng)
    result = K.clairaut_geodesic_check(
        smooth_map, ex31.structures['sasakian'], None, starts, 1.0, 1e-3,
        ex31.splits['frames'])
    assert result.max_drift < 1e-6
    assert result.conserved
    for trace in result.traces:
        np.testing.assert_allclose(trace.theta, math.pi / 2, atol=1e-9)


def test_domain_starts_mix_range_and_perp(ex31):
    smooth_map = ex31.maps['pi']
    split = ex31.splits['frames']
    for start in K.domain_starts(smooth_map, 5, np.random.default_rng(4), 0.6):
        at = split.at(start.point)
        assert geometry.norm(at.metric, start.velocity) == pytest.approx(1.0)
        across = at.perp_projector @ start.velocity
        assert geometry.norm(at.metric, across) == pytest.approx(0.6)
    with pytest.raises(ValueError):
        K.domain_starts(smooth_map, 1, np.random.default_rng(4), 1.0)


def test_example_3_1_is_not_clairaut_along_mixed_geodesics(ex31):
    smooth_map = ex31.maps['pi']
    starts = K.domain_starts(smooth_map, 5, np.random.default_rng(0), 0.6)
    result = K.clairaut_geodesic_check(
        smooth_map, ex31.structures['sasakian'], None, starts, 1.0, 1e-3,
        ex31.splits['frames'])
    assert result.umbilical_characterization
    assert not result.conserved
    assert result.max_drift > 0.1
    for start, trace in zip(starts, result.traces):
        assert trace.theta[0] == pytest.approx(math.acos(0.6))
        a, b, c = heisenberg_components(start.point, start.velocity)
        phase = np.arctan2(b, a) - 2 * c * trace.base.s
        expected = np.abs(math.hypot(a, b) * np.sin(phase))
        np.testing.assert_allclose(trace.invariant, expected, atol=1e-5)
        assert trace.base.norm_drift < 1e-6


def test_fit_constant_is_accepted(ex31):
    smooth_map = ex31.maps['pi']
    starts = K.domain_starts(smooth_map, 1, np.random.default_rng(1))
    result = K.clairaut_geodesic_check(
        smooth_map, ex31.structures['sasakian'], K.FIT_CONSTANT, starts, 0.1,
        1e-2, ex31.splits['frames'])
    assert result.traces[0].h_field == K.FIT_CONSTANT


def test_example_3_2_is_not_clairaut(ex32):
    smooth_map = ex32.maps['pi']
    h = parse_expr('1/(v*e^w)', smooth_map.codomain_manifold.coords)
    starts = K.domain_starts(smooth_map, 2, np.random.default_rng(3))
    for name in ('consistent', 'printed'):
        result = K.clairaut_geodesic_check(
            smooth_map, ex32.structures['trans_sasakian'], h, starts, 0.25,
            1e-3, ex32.splits[name])
        assert result.variant == name
        assert result.umbilical_residual < 1e-10
        assert not result.umbilical_characterization


def test_both_printed_variants_agree(ex32):
    smooth_map = ex32.maps['pi']
    h = parse_expr('1/(v*e^w)', smooth_map.codomain_manifold.coords)
    start = K.domain_starts(smooth_map, 1, np.random.default_rng(5))[0]
    consistent = K.clairaut_trace(ex32.splits['consistent'], h, start, 0.25, 1e-3)
    printed = K.clairaut_trace(ex32.splits['printed'], h, start, 0.25, 1e-3)
    np.testing.assert_allclose(consistent.invariant, printed.invariant,
                               atol=1e-10)


def test_h_must_be_an_expression(ex31):
    with pytest.raises(TypeError):
        K.clairaut_geodesic_check(
            ex31.maps['pi'], ex31.structures['sasakian'], '1', [], 1.0, 1e-2,
            ex31.splits['frames'])


def test_thm31_on_example_3_1(ex31):
    smooth_map = ex31.maps['pi']
    rng = np.random.default_rng(8)
    for p in domain_points(smooth_map, 3):
        gamma = domain_geodesic(smooth_map, p, rng.standard_normal(3))
        report = K.thm31_residuals(smooth_map, ex31.structures['sasakian'],
                                   gamma)
        assert report.equivalent
        assert report.max_residual < 1e-5
        assert report.max_acceleration < 1e-10
        assert all(sample.z_defined for sample in report.samples)


def test_thm31_on_example_3_2(ex32):
    smooth_map = ex32.maps['pi']
    rng = np.random.default_rng(8)
    for p in domain_points(smooth_map, 3):
        gamma = domain_geodesic(smooth_map, p, rng.standard_normal(3))
        structure = ex32.structures['trans_sasakian']
        report = K.thm31_residuals(smooth_map, structure, gamma)
        assert report.equivalent
        for sample, point in zip(report.samples, gamma.samples):
            assert len(sample.range_terms) == 5
            assert len(sample.perp_terms) == 7
            # range and perp parts add up to psi of the image acceleration
            local = local_data(smooth_map, point.point)
            psi = structure.at(local.jet.image).psi
            acceleration = local.second_fundamental_form(
                point.velocity, point.velocity)
            np.testing.assert_allclose(
                K.total(sample.range_terms) + K.total(sample.perp_terms),
                psi @ acceleration, atol=1e-8)


def test_thm31_detects_non_geodesic_image(ex32):
    smooth_map = ex32.maps['pi']
    p = domain_points(smooth_map, 1)[0]
    # straight along the horizontal direction: the image has acceleration
    gamma = domain_geodesic(smooth_map, p, [1.0, -1.0, 0.0])
    report = K.thm31_residuals(smooth_map, ex32.structures['trans_sasakian'],
                               gamma)
    assert report.max_acceleration > 0.5
    assert report.max_residual > 1e-3
    assert report.equivalent


def test_thm31_rejects_drifting_geodesic(ex31):
    smooth_map = ex31.maps['pi']
    p = domain_points(smooth_map, 1)[0]
    gamma = domain_geodesic(smooth_map, p, [1.0, 0.0, 0.0])
    gamma.samples[-1] = geometry.GeodesicSample(
        s=gamma.samples[-1].s, point=gamma.samples[-1].point,
        velocity=gamma.samples[-1].velocity,
        metric_norm=gamma.samples[-1].metric_norm * 1.01)
    with pytest.raises(K.UncertifiedGeodesicError):
        K.thm31_residuals(smooth_map, ex31.structures['sasakian'], gamma)


def test_thm31_warns_about_vertical_reeb_field():
    structure = flat_cosymplectic(1)
    chart = structure.manifold
    M = euclidean('M', ('a', 'b'))
    # range spanned by x1 and t, so xi lies in range
    smooth_map = linear_map('tilted', M, chart, [[1, 0], [0, 0], [0, 1]])
    p = np.array([0.1, 0.2])
    gamma = domain_geodesic(smooth_map, p, [1.0, 0.0], length=0.1, step=0.05)
    with pytest.warns(K.ReebPositionWarning):
        K.thm31_residuals(smooth_map, structure, gamma)


def test_corollary_terms():
    terms = [
        K.Term('a', np.array([1.0, 0.0])),
        K.Term('b', np.array([0.0, 2.0]), 'alpha'),
        K.Term('c', np.array([3.0, 0.0]), 'beta'),
    ]
    assert [t.label for t in K.corollary_terms(terms, drop=('alpha',))] == ['a', 'c']
    assert [t.label for t in K.corollary_terms(terms, drop=('alpha', 'beta'))] == ['a']
    np.testing.assert_allclose(K.total(terms), [4.0, 2.0])


def test_corollary_forms_with_zero_type(ex32):
    """Dropping alpha and beta terms equals evaluating with (0, 0)."""
    smooth_map = ex32.maps['pi']
    structure = ex32.structures['trans_sasakian']
    p = domain_points(smooth_map, 1)[0]
    gamma = domain_geodesic(smooth_map, p, [1.0, 0.0, 0.3])
    full = K.thm31_residuals(smooth_map, structure, gamma)
    zero = K.thm31_residuals(smooth_map, structure, gamma, type_override=(0.0, 0.0))
    for a, b in zip(full.samples, zero.samples):
        for terms, zero_terms in ((a.range_terms, b.range_terms),
                                  (a.perp_terms, b.perp_terms)):
            np.testing.assert_allclose(
                K.total(K.corollary_terms(terms, drop=('alpha', 'beta'))),
                K.total(zero_terms), atol=1e-12)


def test_covariant_derivative_along_flat_curve():
    s = np.linspace(0.0, 1.0, 11)
    values = np.array([[x * x, 1.0] for x in s])
    gammas = [np.zeros((2, 2, 2))] * len(s)
    velocities = [np.array([1.0, 0.0])] * len(s)
    derivative = K.covariant_derivative_along(gammas, velocities, values, 0.1)
    np.testing.assert_allclose(derivative[:, 0], 2 * s, atol=1e-12)
    with pytest.raises(K.DegenerateTraceError):
        K.covariant_derivative_along(gammas[:1], velocities[:1], values[:1], 0.1)


def test_thm32_on_flat_map(flat):
    smooth_map = flat.maps['pi']
    split = flat.splits['coordinate']
    h = parse_expr('1', smooth_map.codomain_manifold.coords)
    start = K.domain_starts(smooth_map, 1, np.random.default_rng(2))[0]
    trace = K.clairaut_trace(split, h, start, 0.5, 0.01)
    report = K.thm32_residual(smooth_map, flat.structures['cosymplectic'], h,
                              trace, split)
    assert report.passed
    assert len(report.samples[0].rhs_terms) == 4


def test_thm32_with_mixed_starts_on_flat_map(flat):
    smooth_map = flat.maps['pi']
    split = flat.splits['coordinate']
    start = K.domain_starts(smooth_map, 1, np.random.default_rng(2), 0.5)[0]
    trace = K.clairaut_trace(split, None, start, 0.5, 0.01)
    report = K.thm32_residual(smooth_map, flat.structures['cosymplectic'],
                              None, trace, split)
    assert report.passed
    assert report.max_derivation_residual < 1e-10


def test_thm32_with_constant_h_on_example_3_1(ex31):
    smooth_map = ex31.maps['pi']
    split = ex31.splits['frames']
    starts = K.domain_starts(smooth_map, 3, np.random.default_rng(6), 0.6)
    for start in starts:
        trace = K.clairaut_trace(split, None, start, 0.5, 1e-3)
        report = K.thm32_residual(smooth_map, ex31.structures['sasakian'],
                                  None, trace, split)
        assert not report.passed
        for sample, geodesic_sample in zip(report.samples, trace.base.samples):
            a, b, c = heisenberg_components(geodesic_sample.point,
                                            geodesic_sample.velocity)
            values = {term.coefficient: term.value for term in sample.rhs_terms
                      if term.coefficient is not None}
            assert sample.lhs == 0.0
            assert values['alpha'] == pytest.approx(a * b * c, abs=1e-9)
            assert values['beta'] == 0.0
            assert K.total(sample.rhs_terms) == pytest.approx(
                a * b * c, abs=1e-9)
            assert sample.angle_rate == pytest.approx(2 * a * b * c, abs=1e-5)


def test_thm32_with_constant_h_along_range_of_example_3_1(ex31):
    smooth_map = ex31.maps['pi']
    split = ex31.splits['frames']
    for start in K.domain_starts(smooth_map, 3, np.random.default_rng(6)):
        trace = K.clairaut_trace(split, None, start, 0.5, 1e-3)
        report = K.thm32_residual(smooth_map, ex31.structures['sasakian'],
                                  None, trace, split)
        assert report.passed
        assert report.max_derivation_residual < 1e-6


def test_dichotomy_on_rank_two_map(flat):
    smooth_map = flat.maps['pi']
    structure = flat.structures['cosymplectic']
    points = domain_points(smooth_map)
    report = K.thm33_thm34_checks(smooth_map, structure, None, points)
    assert not report.vacuous
    assert report.passed
    coords = smooth_map.codomain_manifold.coords
    tilted = parse_expr('y1', coords)
    report = K.thm33_thm34_checks(smooth_map, structure, tilted, points)
    assert report.h_residual > 0.5
    assert not report.passed


def test_dichotomy_is_vacuous_for_rank_one(ex32):
    smooth_map = ex32.maps['pi']
    report = K.thm33_thm34_checks(
        smooth_map, ex32.structures['trans_sasakian'], None,
        domain_points(smooth_map))
    assert report.vacuous
    assert report.passed


def test_contact_distribution_is_not_integrable():
    structure = sasakian_example()
    chart = structure.manifold
    contact = [geometry.VectorFieldSpec.parse(['0', '2', '0'], chart.coords),
               geometry.VectorFieldSpec.parse(['2', '0', '2*v'], chart.coords)]
    report = K.integrability_check(chart, contact, [structure.xi],
                                   [[0.1, 0.2, 0.5], [-0.3, 0.4, 1.0]])
    assert report.residual == pytest.approx(2.0)
    assert not report.holds


def test_perp_frames_of_example_3_2_are_integrable(ex32):
    frames = ex32.frames
    chart = frames['perp'].manifold
    points = geometry.sample_points(chart.domain, 5, np.random.default_rng(0))
    report = K.integrability_check(chart, frames['perp'].fields,
                                   frames['range'].fields, points)
    assert report.residual < 1e-8


def test_totally_geodesic_flat_frames(flat):
    frames = flat.frames
    chart = frames['perp'].manifold
    points = geometry.sample_points(chart.domain, 3, np.random.default_rng(0))
    report = K.totally_geodesic_check(chart, frames['perp'].fields,
                                      frames['range'].fields, points)
    assert report.holds


def test_range_integrability(flat, ex32):
    split = flat.splits['coordinate']
    points = geometry.sample_points(split.manifold.domain, 3,
                                    np.random.default_rng(0))
    report = K.range_integrability_check(
        split, flat.structures['cosymplectic'], points)
    assert report.pairs == 3
    assert report.integrable
    assert not report.vacuous
    assert report.holds

    split = ex32.splits['consistent']
    points = [local_data(split.smooth_map, p).jet.image
              for p in domain_points(split.smooth_map, 2)]
    report = K.range_integrability_check(
        split, ex32.structures['trans_sasakian'], points)
    assert report.vacuous
