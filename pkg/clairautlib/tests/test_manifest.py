"""Tests for loading manifests and running their checks."""

import copy
import json

import numpy as np
import pytest

from clairautlib import manifest as M
from clairautlib.report import exit_code


IDENTITY = [['1', '0', '0'], ['0', '1', '0'], ['0', '0', '1']]


def minimal(**extra):
    data = {
        'name': 'minimal',
        'manifolds': {
            'R': {'coords': ['x', 'y', 'z'], 'metric': IDENTITY,
                  'domain': {'bounds': {'x': [0, 1]}}},
        },
    }
    data.update(extra)
    return data


def fixture_data(name):
    with open(M.fixture_path(name)) as f:
        return json.load(f)


@pytest.mark.parametrize("name,manifolds,structures,maps,checks", [
    ('example_2_1', 1, 1, 0, 5),
    ('example_3_1', 2, 1, 1, 10),
    ('example_3_2', 2, 1, 1, 17),
    ('flat_cosymplectic', 2, 1, 1, 16),
])
def test_bundled_fixtures(name, manifolds, structures, maps, checks):
    manifest = M.load_manifest(name)
    assert manifest.name == name
    assert len(manifest.manifolds) == manifolds
    assert len(manifest.structures) == structures
    assert len(manifest.maps) == maps
    assert len(manifest.checks) == checks


def test_bundled_fixture_names():
    assert M.bundled_fixtures() == [
        'example_2_1', 'example_3_1', 'example_3_2', 'flat_cosymplectic']


def test_unresolved_reference():
    data = minimal(structures={'s': {
        'manifold': 'X', 'psi': IDENTITY, 'xi': ['0', '0', '1'],
        'eta': ['0', '0', '1']}})
    with pytest.raises(M.UnresolvedReferenceError) as error:
        M.build_manifest(data)
    assert error.value.name == 'X'
    assert error.value.kind == 'manifold'
    assert "'X'" in str(error.value)
    assert error.value.location == 'structures.s'


def test_unresolved_check_parameter():
    data = minimal(checks=[
        {'name': 'm', 'type': 'metric', 'params': {'manifold': 'Q'}}])
    with pytest.raises(M.UnresolvedReferenceError) as error:
        M.build_manifest(data)
    assert error.value.location == 'checks[0].params.manifold'


def test_expression_error_location():
    data = minimal()
    data['manifolds']['R']['metric'] = copy.deepcopy(IDENTITY)
    data['manifolds']['R']['metric'][1][2] = '1 +'
    with pytest.raises(M.ManifestError) as error:
        M.build_manifest(data)
    assert error.value.location == 'manifolds.R.metric[1][2]'
    assert '(byte 3)' in str(error.value)


def test_metric_dimension_mismatch():
    data = minimal()
    data['manifolds']['R']['metric'] = IDENTITY[:2]
    with pytest.raises(M.DimensionMismatchError):
        M.build_manifest(data)


def test_unknown_check_type():
    data = minimal(checks=[{'name': 'm', 'type': 'curvature'}])
    with pytest.raises(M.ManifestError) as error:
        M.build_manifest(data)
    assert 'curvature' in str(error.value)


def test_duplicate_check_names():
    check = {'name': 'm', 'type': 'metric', 'params': {'manifold': 'R'}}
    with pytest.raises(M.ManifestError):
        M.build_manifest(minimal(checks=[check, check]))


def test_bad_points():
    data = minimal(checks=[{'name': 'm', 'type': 'metric',
                            'params': {'manifold': 'R'}, 'points': 'many'}])
    with pytest.raises(M.ManifestError) as error:
        M.build_manifest(data)
    assert error.value.location == 'checks[0].points'


def test_json_error_location(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{\n  "name": \n}\n')
    with pytest.raises(M.ManifestError) as error:
        M.load_manifest(str(path))
    assert error.value.location.startswith(str(path) + ':3:')


def test_missing_file(tmp_path):
    with pytest.raises(M.ManifestError):
        M.load_manifest(str(tmp_path / 'nowhere.json'))


def test_python_manifest(tmp_path):
    path = tmp_path / 'cube.manifest.py'
    path.write_text('manifest = {}\n'.format(repr(minimal(name='cube'))))
    manifest = M.load_manifest(str(path))
    assert manifest.name == 'cube'
    assert list(manifest.manifolds) == ['R']


def test_python_manifest_without_definition(tmp_path):
    path = tmp_path / 'empty.manifest.py'
    path.write_text('something = 1\n')
    with pytest.raises(M.DefinitionError):
        M.load_manifest(str(path))


def test_empty_checks():
    manifest = M.build_manifest(minimal())
    report = M.run_checks(manifest)
    assert report.checks == []
    assert exit_code(report) == 0


@pytest.mark.parametrize("name", M.bundled_fixtures())
def test_fixture_checks_pass(name):
    report = M.run_checks(M.load_manifest(name))
    statuses = {check.name: check.status for check in report.checks}
    assert set(statuses.values()) <= {'pass', 'vacuous'}, [
        (c.name, c.status, c.error, c.residuals) for c in report.checks
        if c.status not in ('pass', 'vacuous')]
    vacuous = sorted(n for n, s in statuses.items() if s == 'vacuous')
    if name == 'example_3_2':
        assert vacuous == ['dichotomy', 'range_integrability']
    else:
        assert vacuous == []


def test_expected_failures_are_reported():
    report = M.run_checks(M.load_manifest('example_3_2'))
    results = {check.name: check for check in report.checks}
    for name in ('harmonicity', 'clairaut_consistent', 'clairaut_printed'):
        assert results[name].status == 'pass'
        assert results[name].holds is False
    assert results['clairaut_printed'].variant == 'printed'


def test_example_3_1_fails_off_range_geodesics():
    report = M.run_checks(M.load_manifest('example_3_1'))
    results = {check.name: check for check in report.checks}
    assert results['clairaut_range'].holds is True
    for name in ('clairaut', 'thm32'):
        assert results[name].status == 'pass'
        assert results[name].holds is False
    assert results['clairaut'].residuals['drift'] > 0.1
    assert results['clairaut'].residuals['umbilical'] < 1e-8
    assert results['thm32'].residuals['derivation'] > 1e-3


def test_failing_check():
    data = minimal(checks=[{'name': 'm', 'type': 'metric',
                            'params': {'manifold': 'R'}}])
    data['manifolds']['R']['metric'] = [
        ['1', '2', '0'], ['2', '1', '0'], ['0', '0', '1']]
    report = M.run_checks(M.build_manifest(data))
    assert report.checks[0].status == 'fail'
    assert 'message' in report.checks[0].artifacts
    assert exit_code(report) == 1


def test_erroring_check():
    data = minimal(
        frames={'f': {'manifold': 'R', 'fields': [['1', '0', '0']]}},
        checks=[{'name': 'outside', 'type': 'integrability',
                 'params': {'frames': 'f'}, 'points': [[2.0, 0.0, 0.0]]}])
    report = M.run_checks(M.build_manifest(data))
    result = report.checks[0]
    assert result.status == 'error'
    assert result.error.startswith('PointOutsideDomainError')
    assert exit_code(report) == 2


def test_tolerance_override():
    report = M.run_checks(M.load_manifest('example_2_1'), tol=0.5)
    assert all(check.tolerance == 0.5 for check in report.checks)


def seeded_checks(seed):
    data = fixture_data('example_2_1')
    check = {'name': 'a', 'type': 'type_estimate',
             'params': {'structure': 'sasakian'}, 'points': {'random': 1},
             'tolerance': 1e-6, 'seed': seed}
    data['checks'] = [check, dict(check, name='b')]
    return M.build_manifest(data)


def first_point(result):
    return result.artifacts['estimates'][0].point


def test_check_seed():
    report = M.run_checks(seeded_checks(3))
    a, b = report.checks
    np.testing.assert_array_equal(first_point(a), first_point(b))


def test_seed_override_replaces_check_seeds():
    report = M.run_checks(seeded_checks(3), seed=11)
    assert report.seed == 11
    a, b = report.checks
    assert not np.array_equal(first_point(a), first_point(b))


def test_jobs_keep_order():
    manifest = M.load_manifest('example_2_1')
    serial = M.run_checks(manifest)
    threaded = M.run_checks(manifest, jobs=4)
    assert [c.name for c in threaded.checks] == [c.name for c in serial.checks]
    assert ([c.residuals for c in threaded.checks]
            == [c.residuals for c in serial.checks])


def test_check_validates_tolerance():
    data = minimal(checks=[{'name': 'm', 'type': 'metric',
                            'params': {'manifold': 'R'}, 'tolerance': -1}])
    with pytest.raises(M.ManifestError):
        M.build_manifest(data)
