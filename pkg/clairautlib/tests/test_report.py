"""Tests for check reports."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from clairautlib import report as R
from clairautlib.manifest import load_manifest, run_checks


def result(status, **kwargs):
    return R.CheckResult(name='c', kind='metric', status=status,
                         tolerance=1e-8, **kwargs)


@given(st.lists(st.sampled_from(R.STATUSES)))
def test_exit_code(statuses):
    report = R.Report(manifest='m', seed=0,
                      checks=[result(status) for status in statuses])
    if 'error' in statuses:
        assert R.exit_code(report) == 2
    elif 'fail' in statuses:
        assert R.exit_code(report) == 1
    else:
        assert R.exit_code(report) == 0


def test_unknown_status():
    with pytest.raises(ValueError):
        result('skipped')


def test_json_report():
    report = R.Report(manifest='m', seed=4, checks=[
        result('pass', holds=True, residuals={'isometry': 1e-12}),
        result('error', error='ValueError: boom'),
    ])
    data = json.loads(R.emit_report(report))
    assert data['manifest'] == 'm'
    assert data['seed'] == 4
    assert data['summary'] == {'pass': 1, 'fail': 0, 'vacuous': 0, 'error': 1}
    assert data['checks'][0]['residuals'] == {'isometry': 1e-12}
    assert data['checks'][1]['error'] == 'ValueError: boom'
    assert 'elapsed' not in data


def test_timings():
    report = R.Report(manifest='m', seed=0, elapsed=1.25)
    assert json.loads(R.emit_report(report, timings=True))['elapsed'] == 1.25


def test_non_finite_residuals():
    report = R.Report(manifest='m', seed=0, checks=[
        result('fail', holds=False,
               residuals={'a': float('nan'), 'b': float('inf'), 'c': -float('inf')})])
    data = json.loads(R.emit_report(report))
    assert data['checks'][0]['residuals'] == {'a': 'nan', 'b': 'inf', 'c': '-inf'}


def test_bad_format():
    with pytest.raises(ValueError):
        R.emit_report(R.Report(manifest='m', seed=0), format='yaml')


def test_text_report():
    report = R.Report(manifest='m', seed=0, checks=[
        result('pass', holds=True, residuals={'isometry': 2e-12},
               variant='printed'),
        result('error', error='ValueError: boom'),
    ])
    text = R.emit_report(report, format='text').decode('utf-8')
    lines = text.splitlines()
    assert lines[0].startswith('m (seed 0, clairautlib ')
    assert 'printed' in lines[2]
    assert lines[3].endswith('ValueError: boom')
    assert lines[-1].startswith('1 passed, 0 failed, 0 vacuous, 1 errors')


def test_reports_are_reproducible():
    manifest = load_manifest('example_2_1')
    first = R.emit_report(run_checks(manifest))
    second = R.emit_report(run_checks(manifest))
    assert first == second


def test_floats_have_17_significant_digits():
    report = R.Report(manifest='m', seed=0, checks=[
        result('pass', holds=True, residuals={'a': 0.1, 'b': 1e-12})])
    text = R.emit_report(report).decode('utf-8')
    assert '"a": 0.10000000000000001' in text
    assert '"b": 9.9999999999999998e-13' in text
    data = json.loads(text)
    assert data['checks'][0]['residuals'] == {'a': 0.1, 'b': 1e-12}
