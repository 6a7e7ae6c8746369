"""Console scripts: run, validate and trace manifests."""

import argparse
import csv
import os
import sys

import numpy as np

from clairautlib import clairaut, geometry, report
from clairautlib.expr import (
    ExpressionDomainError, ExpressionSyntaxError, UnknownIdentifierError,
)
from clairautlib.manifest import (
    ManifestError, bundled_fixtures, load_manifest, run_checks,
)


# reported as ERROR lines rather than tracebacks
CLI_ERRORS = (
    ManifestError, ExpressionDomainError, ExpressionSyntaxError,
    UnknownIdentifierError, ValueError,
    geometry.PointOutsideDomainError, geometry.DomainExitError,
    geometry.StepTooLargeError, geometry.SingularMetricError,
    clairaut.FrameSpanError, clairaut.FrameMismatchError,
    clairaut.DegenerateTraceError,
)


def run_script(f):
    sys.exit(f(sys.argv[1:]))


def manifest_path(path):
    if os.path.exists(path):
        return os.path.abspath(path)
    if path in bundled_fixtures():
        return path
    raise argparse.ArgumentTypeError(
        'manifest {} does not exist and is not a bundled fixture ({})'.format(
            path, ', '.join(bundled_fixtures())))


def vector(text):
    try:
        return np.array([float(x) for x in text.split(',')])
    except ValueError:
        raise argparse.ArgumentTypeError(
            'expected comma separated numbers, got {!r}'.format(text))


def positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError('expected a positive integer')
    return value


"""
clairaut-check
"""


def check_manifest(args):
    parser = argparse.ArgumentParser(prog='clairaut-check')
    parser.add_argument(
        'manifest', metavar='MANIFEST', type=manifest_path,
        help='Path to a manifest, or the name of a bundled fixture',
    )
    parser.add_argument('--seed', type=int, help='Override the manifest seed')
    parser.add_argument('--tol', type=float, help='Override every tolerance')
    parser.add_argument(
        '--format', choices=report.FORMATS, default='json',
        help='Report format',
    )
    parser.add_argument(
        '--out', '-o', type=os.path.abspath,
        help='Where to write the report',
    )
    parser.add_argument(
        '--jobs', '-j', type=positive_int, default=1,
        help='Number of checks to run at the same time',
    )
    parser.add_argument(
        '--timings', action='store_true',
        help='Include the elapsed time in JSON reports',
    )
    opts = parser.parse_args(args)
    try:
        manifest = load_manifest(opts.manifest)
    except ManifestError as e:
        sys.stderr.write('ERROR: {}\n'.format(e))
        return 2
    result = run_checks(manifest, seed=opts.seed, tol=opts.tol, jobs=opts.jobs)
    if not opts.out:
        report.write_report(result, sys.stdout, opts.format, opts.timings)
    else:
        with open(opts.out, 'w') as output:
            report.write_report(result, output, opts.format, opts.timings)
    for check in result.checks:
        if check.status == 'error':
            sys.stderr.write('ERROR: {}: {}\n'.format(check.name, check.error))
    return report.exit_code(result)


def check_manifest_script():
    """Entry point for clairaut-check."""
    run_script(check_manifest)


"""
clairaut-validate
"""


def describe(manifest):
    return '{} manifolds, {} structures, {} maps, {} checks'.format(
        len(manifest.manifolds), len(manifest.structures), len(manifest.maps),
        len(manifest.checks))


def validate_manifests(args):
    """Parse manifests without running their checks."""
    parser = argparse.ArgumentParser(prog='clairaut-validate')
    parser.add_argument(
        'manifests', metavar='MANIFEST', type=manifest_path, nargs='+',
        help='Path to a manifest, or the name of a bundled fixture',
    )
    opts = parser.parse_args(args)
    status = 0
    for path in opts.manifests:
        try:
            manifest = load_manifest(path)
        except ManifestError as e:
            sys.stderr.write('ERROR: {}\n'.format(e))
            status = 1
            continue
        sys.stdout.write('{}: ok ({})\n'.format(manifest.name, describe(manifest)))
    return status


def validate_manifests_script():
    """Entry point for clairaut-validate."""
    run_script(validate_manifests)


"""
clairaut-geodesic
"""


def find_split(manifest, map_name, split_name=None):
    if split_name is not None:
        split = manifest.lookup('split', split_name)
        if split.smooth_map.name != map_name:
            raise ManifestError('split {} does not belong to map {}'.format(
                split_name, map_name))
        return split
    for split in manifest.splits.values():
        if split.smooth_map.name == map_name:
            return split
    raise ManifestError('map {} has no declared split'.format(map_name))


def write_trace(trace, stream):
    """CSV with ``s, x1..xn, v1..vn, theta, invariant`` per sample."""
    n = trace.base.manifold.dim
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(
        ['s'] + ['x{}'.format(i + 1) for i in range(n)]
        + ['v{}'.format(i + 1) for i in range(n)] + ['theta', 'invariant'])
    for sample, theta, invariant in zip(
            trace.base.samples, trace.theta, trace.invariant):
        row = [sample.s] + list(sample.point) + list(sample.velocity)
        writer.writerow([report.format_float(float(x))
                         for x in row + [theta, invariant]])


def dump_geodesic(args):
    """Integrate one codomain geodesic and dump it as CSV."""
    parser = argparse.ArgumentParser(prog='clairaut-geodesic')
    parser.add_argument(
        'manifest', metavar='MANIFEST', type=manifest_path,
        help='Path to a manifest, or the name of a bundled fixture',
    )
    parser.add_argument('--map', required=True, help='Name of the map')
    parser.add_argument(
        '--start', type=vector, required=True,
        help='Codomain start point, e.g. 0,1.2,0',
    )
    parser.add_argument(
        '--velocity', type=vector, required=True,
        help='Initial velocity in codomain coordinates',
    )
    parser.add_argument('--length', type=float, default=1.0)
    parser.add_argument('--step', type=float, default=1e-3)
    parser.add_argument(
        '--split', help='Declared split giving range off the image',
    )
    parser.add_argument(
        '--h', default=clairaut.FIT_CONSTANT,
        help='Expression for h on the codomain',
    )
    parser.add_argument(
        '--out', '-o', type=os.path.abspath,
        help='Where to write the CSV',
    )
    opts = parser.parse_args(args)
    try:
        manifest = load_manifest(opts.manifest)
        smooth_map = manifest.lookup('map', opts.map)
        split = find_split(manifest, smooth_map.name, opts.split)
        h = None
        if opts.h != clairaut.FIT_CONSTANT:
            h = smooth_map.codomain_manifold.parse(opts.h)
        start = clairaut.ClairautStart(point=opts.start, velocity=opts.velocity)
        trace = clairaut.clairaut_trace(split, h, start, opts.length, opts.step)
    except CLI_ERRORS as e:
        sys.stderr.write('ERROR: {}\n'.format(e))
        return 1
    if not opts.out:
        write_trace(trace, sys.stdout)
    else:
        with open(opts.out, 'w', newline='') as output:
            write_trace(trace, output)
    return 0


def dump_geodesic_script():
    """Entry point for clairaut-geodesic."""
    run_script(dump_geodesic)
