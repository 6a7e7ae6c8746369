"""Declarative check suites: load a manifest and run its checks."""

import concurrent.futures
import importlib.util
import json
import math
import os
import time

import attr
import numpy as np
from attr.validators import instance_of, optional

from clairautlib import clairaut, contact, geometry, rmap
from clairautlib.expr import (
    ExpressionSyntaxError, UnknownIdentifierError, evaluate, parse_expr,
)
from clairautlib.report import CheckResult, Report
from clairautlib.validators import is_identifier, is_in, is_positive


MANIFEST_SUFFIX = '.manifest.py'
FIXTURE_DIR = os.path.join(os.path.dirname(__file__), 'fixtures')
DEFAULT_SEED = 0
DEFAULT_TOLERANCE = 1e-8
DEFAULT_POINT_COUNT = 5


class ManifestError(Exception):
    """Raised when a manifest cannot be parsed or validated."""

    def __init__(self, message, location=''):
        super().__init__('{}: {}'.format(location, message) if location else message)
        self.location = location


class UnresolvedReferenceError(ManifestError):
    """Raised when a manifest refers to a name it does not define."""

    def __init__(self, kind, name, location=''):
        super().__init__('undefined {} {!r}'.format(kind, name), location)
        self.kind = kind
        self.name = name


class DimensionMismatchError(ManifestError):
    """Raised when manifest objects disagree on dimensions."""


class DefinitionError(ManifestError):
    """Raised when there is a problem loading a manifest from a python definition."""


@attr.s(frozen=True)
class Frame(object):
    """Named list of vector fields on one manifold."""

    name = attr.ib(validator=is_identifier)
    manifold = attr.ib(validator=instance_of(geometry.ChartManifold))
    fields = attr.ib(converter=tuple)


@attr.s
class Check(object):
    """One check invocation.

    :param kind: name of a registered check, see :data:`CHECKS`
    :param points: explicit points, or a number of random points
    :param expect: whether the checked property is expected to hold
    """

    name = attr.ib(validator=instance_of(str))
    kind = attr.ib(validator=instance_of(str))
    params = attr.ib(default=attr.Factory(dict), validator=instance_of(dict))
    points = attr.ib(default=DEFAULT_POINT_COUNT)
    tolerance = attr.ib(default=None, validator=optional(is_positive))
    seed = attr.ib(default=None, validator=optional(instance_of(int)))
    expect = attr.ib(default=True, validator=instance_of(bool))

    @kind.validator
    def _check_kind(self, attribute, value):
        is_in(sorted(CHECKS))(self, attribute, value)


@attr.s
class Manifest(object):
    name = attr.ib(validator=instance_of(str))
    description = attr.ib(default='', validator=instance_of(str))
    seed = attr.ib(default=DEFAULT_SEED, validator=instance_of(int))
    tolerance = attr.ib(default=DEFAULT_TOLERANCE, validator=is_positive)
    manifolds = attr.ib(default=attr.Factory(dict))
    structures = attr.ib(default=attr.Factory(dict))
    maps = attr.ib(default=attr.Factory(dict))
    frames = attr.ib(default=attr.Factory(dict))
    splits = attr.ib(default=attr.Factory(dict))
    checks = attr.ib(default=attr.Factory(list))

    def lookup(self, kind, name, location=''):
        table = getattr(self, kind + 's')
        if name not in table:
            raise UnresolvedReferenceError(kind, name, location)
        return table[name]


"""
Loading
"""


def _require(data, key, location, kind=None):
    if not isinstance(data, dict) or key not in data:
        raise ManifestError('missing field {!r}'.format(key), location)
    value = data[key]
    if kind is not None and not isinstance(value, kind):
        raise ManifestError('field {!r} has the wrong type'.format(key), location)
    return value


def _expr(text, coords, location):
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = repr(float(text))
    if not isinstance(text, str):
        raise ManifestError('expected an expression string', location)
    try:
        return parse_expr(text, coords)
    except (ExpressionSyntaxError, UnknownIdentifierError) as e:
        raise ManifestError('{} (byte {})'.format(e, e.offset), location)


def _exprs(texts, coords, location, length=None):
    if not isinstance(texts, list):
        raise ManifestError('expected a list of expressions', location)
    if length is not None and len(texts) != length:
        raise DimensionMismatchError(
            'expected {} entries, got {}'.format(length, len(texts)), location)
    return [_expr(t, coords, '{}[{}]'.format(location, i))
            for i, t in enumerate(texts)]


def _matrix(rows, coords, location):
    if not isinstance(rows, list):
        raise ManifestError('expected a matrix', location)
    n = len(coords)
    if len(rows) != n:
        raise DimensionMismatchError(
            'expected {} rows, got {}'.format(n, len(rows)), location)
    return [_exprs(row, coords, '{}[{}]'.format(location, i), n)
            for i, row in enumerate(rows)]


def _intervals(data, coords, location):
    if data is None:
        return None
    if not isinstance(data, dict):
        raise ManifestError('expected a mapping from coordinates', location)
    intervals = []
    for name in data:
        if name not in coords:
            raise UnresolvedReferenceError('coordinate', name, location)
    for name in coords:
        lo, hi = data.get(name, [None, None])
        try:
            intervals.append(geometry.Interval(
                lo=-math.inf if lo is None else lo,
                hi=math.inf if hi is None else hi))
        except (TypeError, ValueError) as e:
            raise ManifestError(str(e), '{}.{}'.format(location, name))
    return intervals


def _domain(data, coords, location):
    data = data or {}
    bounds = _intervals(data.get('bounds', {}), coords, location + '.bounds')
    exclusions = []
    for i, entry in enumerate(data.get('exclude', [])):
        where = '{}.exclude[{}]'.format(location, i)
        coord = _require(entry, 'coord', where, str)
        if coord not in coords:
            raise UnresolvedReferenceError('coordinate', coord, where)
        exclusions.append(geometry.Exclusion(
            index=coords.index(coord), value=entry.get('value', 0.0)))
    return geometry.Domain(
        bounds=bounds, exclusions=exclusions,
        sample_box=_intervals(data.get('sample_box'), coords,
                              location + '.sample_box'))


def _build_manifold(name, data, location):
    coords = _require(data, 'coords', location, list)
    try:
        return geometry.ChartManifold(
            name=name,
            coords=coords,
            metric=_matrix(_require(data, 'metric', location), coords,
                           location + '.metric'),
            domain=_domain(data.get('domain'), coords, location + '.domain'),
        )
    except (TypeError, ValueError) as e:
        raise ManifestError(str(e), location)


def _build_field(texts, manifold, location):
    return geometry.VectorFieldSpec(
        components=_exprs(texts, manifold.coords, location, manifold.dim))


def _build_structure(name, data, manifest, location):
    manifold = manifest.lookup(
        'manifold', _require(data, 'manifold', location), location)
    coords = manifold.coords
    declared = data.get('type')
    if declared is not None:
        declared = contact.DeclaredType(
            alpha=_expr(_require(declared, 'alpha', location + '.type'),
                        coords, location + '.type.alpha'),
            beta=_expr(_require(declared, 'beta', location + '.type'),
                       coords, location + '.type.beta'))
    try:
        return contact.ContactStructure(
            name=name,
            manifold=manifold,
            psi=_matrix(_require(data, 'psi', location), coords,
                        location + '.psi'),
            xi=_build_field(_require(data, 'xi', location), manifold,
                            location + '.xi'),
            eta=_exprs(_require(data, 'eta', location), coords,
                       location + '.eta', manifold.dim),
            declared_type=declared,
        )
    except (TypeError, ValueError) as e:
        raise ManifestError(str(e), location)


def _build_map(name, data, manifest, location):
    domain = manifest.lookup('manifold', _require(data, 'domain', location),
                             location + '.domain')
    codomain = manifest.lookup('manifold', _require(data, 'codomain', location),
                               location + '.codomain')
    return rmap.SmoothMapSpec(
        name=name,
        domain_manifold=domain,
        codomain_manifold=codomain,
        components=_exprs(_require(data, 'components', location),
                          domain.coords, location + '.components',
                          codomain.dim),
    )


def _build_frame(name, data, manifest, location):
    manifold = manifest.lookup(
        'manifold', _require(data, 'manifold', location), location)
    fields = _require(data, 'fields', location, list)
    return Frame(name=name, manifold=manifold, fields=[
        _build_field(f, manifold, '{}.fields[{}]'.format(location, i))
        for i, f in enumerate(fields)])


def _build_split(name, data, manifest, location):
    smooth_map = manifest.lookup('map', _require(data, 'map', location),
                                 location + '.map')
    codomain = smooth_map.codomain_manifold

    def fields(key):
        return [_build_field(f, codomain, '{}.{}[{}]'.format(location, key, i))
                for i, f in enumerate(_require(data, key, location, list))]

    try:
        return clairaut.DeclaredSplit(
            name=name, smooth_map=smooth_map, range_fields=fields('range'),
            perp_fields=fields('perp'), variant=data.get('variant', ''))
    except ValueError as e:
        raise DimensionMismatchError(str(e), location)


def _build_check(index, data, manifest):
    location = 'checks[{}]'.format(index)
    name = _require(data, 'name', location, str)
    kind = _require(data, 'type', location, str)
    if kind not in CHECKS:
        raise ManifestError('unknown check type {!r}'.format(kind), location)
    points = data.get('points', DEFAULT_POINT_COUNT)
    if isinstance(points, dict):
        points = _require(points, 'random', location + '.points', int)
    elif isinstance(points, list):
        points = [tuple(float(x) for x in p) for p in points]
    elif not isinstance(points, int):
        raise ManifestError('points should be a list or {"random": n}',
                            location + '.points')
    params = data.get('params', {})
    for key, table in REFERENCE_PARAMS.items():
        if key in params:
            manifest.lookup(table, params[key], '{}.params.{}'.format(location, key))
    try:
        return Check(
            name=name, kind=kind, params=params, points=points,
            tolerance=data.get('tolerance'), seed=data.get('seed'),
            expect=data.get('expect', True))
    except (TypeError, ValueError) as e:
        raise ManifestError(str(e), location)


REFERENCE_PARAMS = {
    'manifold': 'manifold',
    'structure': 'structure',
    'map': 'map',
    'split': 'split',
    'frames': 'frame',
    'complement': 'frame',
}


def build_manifest(data, name=None):
    """Validate parsed manifest data and resolve every reference."""
    if not isinstance(data, dict):
        raise ManifestError('a manifest should be a mapping')
    manifest = Manifest(
        name=data.get('name', name or 'manifest'),
        description=data.get('description', ''),
        seed=data.get('seed', DEFAULT_SEED),
        tolerance=data.get('tolerance', DEFAULT_TOLERANCE),
    )
    for key, build in (('manifolds', None), ('structures', _build_structure),
                       ('maps', _build_map), ('frames', _build_frame),
                       ('splits', _build_split)):
        entries = data.get(key, {})
        if not isinstance(entries, dict):
            raise ManifestError('should map names to definitions', key)
        table = getattr(manifest, key)
        for entry_name, entry in entries.items():
            location = '{}.{}'.format(key, entry_name)
            if build is None:
                table[entry_name] = _build_manifold(entry_name, entry, location)
            else:
                table[entry_name] = build(entry_name, entry, manifest, location)
    seen = set()
    for index, entry in enumerate(data.get('checks', [])):
        check = _build_check(index, entry, manifest)
        if check.name in seen:
            raise ManifestError('duplicate check name {!r}'.format(check.name),
                                'checks[{}]'.format(index))
        seen.add(check.name)
        manifest.checks.append(check)
    return manifest


def loader(path):
    """Load a manifest from a Python definition.

    :param str path: Path to a *.manifest.py file that defines a variable called manifest.
    """
    spec = importlib.util.spec_from_file_location('manifest', path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)

    marker = object()
    definition = getattr(module, 'manifest', marker)
    if definition is marker:
        raise DefinitionError(
            "Definition {} does not define a variable 'manifest'".format(path))
    return definition


def bundled_fixtures():
    return sorted(f[:-len('.json')] for f in os.listdir(FIXTURE_DIR)
                  if f.endswith('.json'))


def fixture_path(name):
    return os.path.join(FIXTURE_DIR, name + '.json')


def load_manifest(path):
    """Load a manifest from JSON, a ``*.manifest.py`` file or a bundled name."""
    if not os.path.exists(path) and path in bundled_fixtures():
        path = fixture_path(path)
    if path.endswith(MANIFEST_SUFFIX):
        definition = loader(path)
        if isinstance(definition, Manifest):
            return definition
        return build_manifest(
            definition, os.path.basename(path)[:-len(MANIFEST_SUFFIX)])
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise ManifestError(e.strerror or str(e), path)
    except json.JSONDecodeError as e:
        raise ManifestError(e.msg, '{}:{}:{}'.format(path, e.lineno, e.colno))
    return build_manifest(data, os.path.splitext(os.path.basename(path))[0])


"""
Running
"""


@attr.s
class CheckOutcome(object):
    """What a check function found; status is derived by :func:`run_checks`."""

    holds = attr.ib()
    residuals = attr.ib(default=attr.Factory(dict))
    artifacts = attr.ib(default=attr.Factory(dict))
    vacuous = attr.ib(default=False)
    variant = attr.ib(default='')


@attr.s
class CheckContext(object):
    manifest = attr.ib()
    check = attr.ib()
    tolerance = attr.ib()
    rng = attr.ib()

    @property
    def params(self):
        return self.check.params

    def get(self, kind, key=None):
        return self.manifest.lookup(
            kind, self.params[key or kind], 'params.' + (key or kind))

    def points(self, manifold):
        points = self.check.points
        if isinstance(points, int):
            return geometry.sample_points(manifold.domain, points, self.rng)
        return [manifold.check_point(p) for p in points]

    def h(self, manifold):
        text = self.params.get('h', clairaut.FIT_CONSTANT)
        if text == clairaut.FIT_CONSTANT:
            return None
        return _expr(text, manifold.coords, 'params.h')

    def vectors(self, key):
        return [np.array([float(x) for x in v]) for v in self.params[key]]


CHECKS = {}


def register(kind):
    def decorator(f):
        CHECKS[kind] = f
        return f
    return decorator


def _worst(values):
    return max(values, default=0.0)


@register('metric')
def check_metric(ctx):
    manifold = ctx.get('manifold')
    count = ctx.check.points if isinstance(ctx.check.points, int) else len(ctx.check.points)
    try:
        geometry.validate_metric(manifold, ctx.rng, count)
    except geometry.MetricError as e:
        return CheckOutcome(holds=False, artifacts={'message': str(e)})
    return CheckOutcome(holds=True, residuals={'points': count})


@register('almost_contact')
def check_almost_contact(ctx):
    structure = ctx.get('structure')
    report = contact.check_almost_contact(
        structure, ctx.points(structure.manifold), ctx.tolerance, ctx.rng)
    return CheckOutcome(holds=report.passed, residuals=report.residuals)


def _expected_type(ctx, structure, point):
    if 'alpha' in ctx.params:
        coords = structure.manifold.coords
        return (evaluate(_expr(ctx.params['alpha'], coords, 'params.alpha'), point),
                evaluate(_expr(ctx.params['beta'], coords, 'params.beta'), point))
    if structure.declared_type is None:
        return None
    return structure.declared_type.at(point)


@register('type_estimate')
def check_type_estimate(ctx):
    structure = ctx.get('structure')
    estimates, alpha_error, beta_error = [], [], []
    for point in ctx.points(structure.manifold):
        estimate = contact.estimate_type(structure, point)
        estimates.append(estimate)
        expected = _expected_type(ctx, structure, estimate.point)
        if expected is not None:
            alpha_error.append(abs(estimate.alpha - expected[0]))
            beta_error.append(abs(estimate.beta - expected[1]))
    residuals = {
        'alpha': _worst(alpha_error),
        'beta': _worst(beta_error),
        'fit': _worst(e.residual for e in estimates),
    }
    return CheckOutcome(
        holds=all(value < ctx.tolerance for value in residuals.values()),
        residuals=residuals,
        artifacts={'kinds': sorted({e.kind for e in estimates}),
                   'estimates': estimates[:3]})


@register('trans_sasakian')
def check_trans_sasakian(ctx):
    structure = ctx.get('structure')
    worst = dict.fromkeys(('psi', 'eta', 'eta_printed', 'xi'), 0.0)
    for point in ctx.points(structure.manifold):
        expected = _expected_type(ctx, structure, point)
        if expected is None:
            estimate = contact.estimate_type(structure, point)
            expected = estimate.alpha, estimate.beta
        result = contact.trans_sasakian_residual(
            structure, point, expected[0], expected[1], ctx.rng)
        for key in worst:
            worst[key] = max(worst[key], getattr(result, key))
    return CheckOutcome(
        holds=max(worst['psi'], worst['eta'], worst['xi']) < ctx.tolerance,
        residuals=worst)


def _span_mismatch(frame, expected, metric):
    """Distance between the projectors onto two spans."""
    computed = rmap.projector(frame, metric)
    basis = geometry.orthonormalize(expected, metric)
    return float(np.linalg.norm(computed - rmap.projector(basis, metric)))


@register('decomposition')
def check_decomposition(ctx):
    smooth_map = ctx.get('map')
    ranks, kernel, decompositions = [], [], []
    for p in ctx.points(smooth_map.domain_manifold):
        local = rmap.local_data(smooth_map, p)
        decomposition = local.decomposition
        ranks.append(decomposition.rank)
        decompositions.append(decomposition)
        if 'kernel' in ctx.params:
            kernel.append(_span_mismatch(
                decomposition.ker_frame,
                ctx.vectors('kernel'), local.g1))
    holds = True
    if 'rank' in ctx.params:
        holds = all(rank == ctx.params['rank'] for rank in ranks)
    residuals = {'kernel': _worst(kernel)}
    holds = holds and residuals['kernel'] < ctx.tolerance
    return CheckOutcome(
        holds=holds, residuals=residuals,
        artifacts={'ranks': sorted(set(ranks)),
                   'decomposition': decompositions[0] if decompositions else None})


@register('riemannian_map')
def check_riemannian_map(ctx):
    smooth_map = ctx.get('map')
    residual = _worst(rmap.isometry_residual(smooth_map, p)
                      for p in ctx.points(smooth_map.domain_manifold))
    return CheckOutcome(holds=residual < ctx.tolerance,
                        residuals={'isometry': residual})


@register('lemma21')
def check_lemma21(ctx):
    smooth_map = ctx.get('map')
    residual = _worst(rmap.lemma21_residual(smooth_map, p)
                      for p in ctx.points(smooth_map.domain_manifold))
    return CheckOutcome(holds=residual < ctx.tolerance,
                        residuals={'lemma21': residual})


@register('second_fundamental_form')
def check_second_fundamental_form(ctx):
    """(nabla pi_*)(Z, Z) on the unit horizontal frame, against ``expected``."""
    smooth_map = ctx.get('map')
    domain = smooth_map.domain_manifold
    expected = None
    if 'expected' in ctx.params:
        expected = _exprs(ctx.params['expected'], domain.coords,
                          'params.expected', smooth_map.codomain_manifold.dim)
    errors, samples = [], []
    for p in ctx.points(domain):
        local = rmap.local_data(smooth_map, p)
        for Z in local.decomposition.hker_frame:
            value = local.second_fundamental_form(Z, Z)
            target = (np.zeros(len(value)) if expected is None
                      else np.array([evaluate(e, local.jet.point) for e in expected]))
            errors.append(float(np.max(np.abs(value - target))))
            samples.append({'point': list(local.jet.point), 'value': list(value)})
    return CheckOutcome(holds=_worst(errors) < ctx.tolerance,
                        residuals={'sff': _worst(errors)},
                        artifacts={'samples': samples[:3]})


@register('anti_invariance')
def check_anti_invariance(ctx):
    smooth_map, structure = ctx.get('map'), ctx.get('structure')
    splits = [clairaut.anti_invariance_check(smooth_map, structure, p, ctx.tolerance)
              for p in ctx.points(smooth_map.domain_manifold)]
    positions = sorted({s.reeb_position for s in splits})
    holds = all(s.is_anti_invariant for s in splits)
    if 'reeb' in ctx.params:
        holds = holds and positions == [ctx.params['reeb']]
    return CheckOutcome(
        holds=holds,
        residuals={
            'anti_invariance': _worst(s.residual for s in splits),
            'mu_invariance': _worst(s.mu_invariance_residual for s in splits),
            'gram_determinant': min((s.gram_determinant for s in splits),
                                    default=1.0),
        },
        artifacts={'reeb_positions': positions,
                   'split': splits[0] if splits else None})


@register('bc_split')
def check_bc_split(ctx):
    """psi V = BV + CV over the (range)-perp frame, Pythagoras residual."""
    smooth_map, structure = ctx.get('map'), ctx.get('structure')
    residual, parts = 0.0, []
    for p in ctx.points(smooth_map.domain_manifold):
        split = clairaut.anti_invariance_check(smooth_map, structure, p)
        g = split.metric
        for V in split.rperp_frame:
            BV, CV = clairaut.bc_split(split, V)
            image = split.psi @ V
            residual = max(
                residual,
                abs(geometry.inner(g, BV, BV) + geometry.inner(g, CV, CV)
                    - geometry.inner(g, image, image)),
                abs(geometry.inner(g, BV, CV)))
            parts.append({'V': list(V), 'B': list(BV), 'C': list(CV)})
    return CheckOutcome(holds=residual < ctx.tolerance,
                        residuals={'pythagoras': residual},
                        artifacts={'parts': parts[:3]})


@register('umbilical')
def check_umbilical(ctx):
    smooth_map = ctx.get('map')
    fits = [rmap.umbilical_fit(smooth_map, p)
            for p in ctx.points(smooth_map.domain_manifold)]
    misfit = _worst(m for _, m in fits)
    return CheckOutcome(holds=misfit < ctx.tolerance,
                        residuals={'umbilical': misfit},
                        artifacts={'H2': [list(H) for H, _ in fits[:3]]})


@register('harmonicity')
def check_harmonicity(ctx):
    smooth_map = ctx.get('map')
    report = rmap.harmonicity_report(
        smooth_map, ctx.points(smooth_map.domain_manifold), ctx.tolerance)
    return CheckOutcome(
        holds=report.harmonic,
        residuals={
            'tension': report.max('tension_norm'),
            'vertical_mean_curvature': report.max('vertical_mean_curvature_norm'),
            'trace_identity': report.max('trace_identity_residual'),
            'umbilical_identity': report.max('umbilical_identity_residual'),
        })


@register('declared_split')
def check_declared_split(ctx):
    split = ctx.get('split')
    try:
        mismatch = clairaut.validate_declared_split(
            split, ctx.points(split.smooth_map.domain_manifold), ctx.tolerance)
    except clairaut.FrameMismatchError as e:
        return CheckOutcome(holds=False, artifacts={'message': str(e)},
                            variant=split.variant)
    return CheckOutcome(holds=True, residuals={'projector': mismatch},
                        variant=split.variant)


def _starts(ctx, smooth_map):
    starts = ctx.params.get('starts', DEFAULT_POINT_COUNT)
    if isinstance(starts, int):
        return clairaut.domain_starts(
            smooth_map, starts, ctx.rng, ctx.params.get('perp_share', 0.0))
    return [clairaut.ClairautStart(point=np.array(s['point'], dtype=float),
                                   velocity=np.array(s['velocity'], dtype=float))
            for s in starts]


def _clairaut_run(ctx):
    smooth_map, structure = ctx.get('map'), ctx.get('structure')
    split = ctx.get('split')
    starts = _starts(ctx, smooth_map)
    clairaut.validate_declared_split(
        split, [s.domain_point for s in starts if s.domain_point is not None])
    h = ctx.h(smooth_map.codomain_manifold)
    result = clairaut.clairaut_geodesic_check(
        smooth_map, structure, h, starts, ctx.params.get('length', 1.0),
        ctx.params.get('step', 1e-3), split, ctx.tolerance)
    return smooth_map, structure, split, h, result


@register('clairaut')
def check_clairaut(ctx):
    """Invariant drift; with ``definition`` also H2 = -grad h."""
    _, _, split, _, result = _clairaut_run(ctx)
    holds = result.conserved
    if ctx.params.get('definition', False):
        holds = holds and result.umbilical_characterization
    return CheckOutcome(
        holds=holds,
        residuals={
            'drift': result.max_drift,
            'umbilical': result.umbilical_residual,
            'gradient': result.gradient_residual,
        },
        artifacts={'traces': result.traces,
                   'samples': result.definition_samples[:3]},
        variant=split.variant)


def _type_override(ctx):
    override = ctx.params.get('type')
    return None if override is None else tuple(float(x) for x in override)


@register('thm31')
def check_thm31(ctx):
    smooth_map, structure = ctx.get('map'), ctx.get('structure')
    domain = smooth_map.domain_manifold
    reports = []
    for p in geometry.sample_points(
            domain.domain, ctx.params.get('starts', DEFAULT_POINT_COUNT), ctx.rng):
        g1 = geometry.metric_at(domain, p)
        v = ctx.rng.standard_normal(domain.dim)
        v /= geometry.norm(g1, v)
        gamma = geometry.integrate_geodesic(
            domain, p, v, ctx.params.get('length', 0.2),
            ctx.params.get('step', 1e-2))
        reports.append(clairaut.thm31_residuals(
            smooth_map, structure, gamma, _type_override(ctx), ctx.tolerance))
    return CheckOutcome(
        holds=all(r.equivalent for r in reports),
        residuals={
            'residual': _worst(r.max_residual for r in reports),
            'acceleration': _worst(r.max_acceleration for r in reports),
            'one_sided': sum(len(r.one_sided) for r in reports),
        },
        artifacts={'traces': reports})


@register('thm32')
def check_thm32(ctx):
    smooth_map, structure, split, h, result = _clairaut_run(ctx)
    reports = [clairaut.thm32_residual(smooth_map, structure, h, trace, split,
                                       _type_override(ctx), ctx.tolerance)
               for trace in result.traces]
    residual = _worst(r.max_residual for r in reports)
    derivation = _worst(r.max_derivation_residual for r in reports)
    return CheckOutcome(holds=residual < ctx.tolerance,
                        residuals={'thm32': residual, 'derivation': derivation},
                        artifacts={'traces': reports}, variant=split.variant)


@register('thm33_thm34')
def check_thm33_thm34(ctx):
    smooth_map, structure = ctx.get('map'), ctx.get('structure')
    report = clairaut.thm33_thm34_checks(
        smooth_map, structure, ctx.h(smooth_map.codomain_manifold),
        ctx.points(smooth_map.domain_manifold), ctx.tolerance)
    return CheckOutcome(
        holds=report.passed, vacuous=report.vacuous,
        residuals={'h_along_psi_range': report.h_residual,
                   'range_mean_curvature': report.mean_curvature},
        artifacts={'ranks': sorted(set(report.ranks))})


def _frames(ctx):
    frames = ctx.get('frame', 'frames')
    complement = (ctx.get('frame', 'complement')
                  if 'complement' in ctx.params else None)
    if complement is not None and complement.manifold != frames.manifold:
        raise DimensionMismatchError('frames live on different manifolds')
    return frames, complement.fields if complement else ()


@register('integrability')
def check_integrability(ctx):
    frames, complement = _frames(ctx)
    report = clairaut.integrability_check(
        frames.manifold, frames.fields, complement,
        ctx.points(frames.manifold), ctx.tolerance)
    return CheckOutcome(holds=report.holds,
                        residuals={'bracket': report.residual})


@register('totally_geodesic')
def check_totally_geodesic(ctx):
    frames, complement = _frames(ctx)
    report = clairaut.totally_geodesic_check(
        frames.manifold, frames.fields, complement,
        ctx.points(frames.manifold), ctx.tolerance)
    return CheckOutcome(holds=report.holds,
                        residuals={'normal_component': report.residual})


@register('range_integrability')
def check_range_integrability(ctx):
    split, structure = ctx.get('split'), ctx.get('structure')
    report = clairaut.range_integrability_check(
        split, structure, ctx.points(split.manifold), ctx.tolerance)
    return CheckOutcome(
        holds=report.holds, vacuous=report.vacuous,
        residuals={'bracket': report.bracket, 'psi_term': report.psi_term},
        variant=split.variant)


def run_check(manifest, index, seed=None, tol=None):
    """Run one check; exceptions become an ``error`` result."""
    check = manifest.checks[index]
    tolerance = tol if tol is not None else (
        check.tolerance if check.tolerance is not None else manifest.tolerance)
    if check.seed is not None and seed is None:
        rng = np.random.default_rng(check.seed)
    else:
        rng = np.random.default_rng(
            [manifest.seed if seed is None else seed, index])
    ctx = CheckContext(manifest=manifest, check=check, tolerance=tolerance,
                       rng=rng)
    try:
        outcome = CHECKS[check.kind](ctx)
    except Exception as e:
        return CheckResult(
            name=check.name, kind=check.kind, status='error',
            tolerance=tolerance, expect=check.expect,
            error='{}: {}'.format(type(e).__name__, e))
    if outcome.vacuous:
        status = 'vacuous'
    else:
        status = 'pass' if bool(outcome.holds) == check.expect else 'fail'
    return CheckResult(
        name=check.name, kind=check.kind, status=status, tolerance=tolerance,
        expect=check.expect, holds=bool(outcome.holds),
        residuals=outcome.residuals, artifacts=outcome.artifacts,
        variant=outcome.variant)


def run_checks(manifest, seed=None, tol=None, jobs=1):
    """Run every check of ``manifest`` and collect a :class:`Report`.

    :param seed: overrides the manifest seed and every per-check seed
    :param tol: overrides every tolerance
    :param jobs: number of worker threads; results keep manifest order
    """
    started = time.perf_counter()
    indices = range(len(manifest.checks))
    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(
                lambda i: run_check(manifest, i, seed, tol), indices))
    else:
        results = [run_check(manifest, i, seed, tol) for i in indices]
    return Report(
        manifest=manifest.name,
        seed=manifest.seed if seed is None else seed,
        checks=results,
        elapsed=time.perf_counter() - started,
    )
