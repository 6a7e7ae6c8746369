"""Metric geometry on a single coordinate chart.

Metrics and fields are given as expressions; all derivatives come from
:mod:`clairautlib.expr`, so Christoffel symbols and covariant derivatives
carry no truncation error. Only the geodesic integrator discretizes.
"""

import math

import attr
import numpy as np
from attr.validators import instance_of

from clairautlib.expr import (
    RESERVED_NAMES, ScalarFieldExpr, eval_jet1, evaluate, parse_expr,
)
from clairautlib.validators import is_identifier, is_list_of, is_square_matrix


SINGULAR_CONDITION = 1e12
METRIC_SYMMETRY_TOL = 1e-12
METRIC_EIGENVALUE_FLOOR = 1e-10
METRIC_SAMPLE_COUNT = 50
GRAM_EIGENVALUE_FLOOR = 1e-10
EXCLUSION_MARGIN = 1e-3
NORM_DRIFT_LIMIT = 1e-3
MAX_SAMPLING_ATTEMPTS = 1000


class PointOutsideDomainError(Exception):
    """Raised when a point is not in the open domain of a chart."""


class MetricError(Exception):
    """Raised when a metric is not symmetric positive definite."""


class SingularMetricError(Exception):
    """Raised when a metric is too ill-conditioned to invert."""


class DomainExitError(Exception):
    """Raised when a geodesic leaves the domain of its chart.

    ``trace`` holds every sample computed before the exit.
    """

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace

    @property
    def last_sample(self):
        return self.trace.samples[-1]


class StepTooLargeError(Exception):
    """Raised when the geodesic speed drifts further than RK4 allows."""


class RankDeficiencyError(Exception):
    """Raised when a frame handed to Gram-Schmidt is linearly dependent."""

    def __init__(self, index):
        super().__init__(
            'frame vector {} is linearly dependent on the ones before it'
            .format(index))
        self.index = index


"""
Domains
"""


@attr.s(frozen=True)
class Interval(object):
    lo = attr.ib(default=-math.inf, converter=float)
    hi = attr.ib(default=math.inf, converter=float)

    @hi.validator
    def _check_order(self, attribute, value):
        if not value > self.lo:
            raise ValueError('interval should satisfy lo < hi, got ({}, {})'
                             .format(self.lo, value))

    def contains(self, x):
        return self.lo < x < self.hi

    def sampling_range(self):
        """Finite range to draw samples from."""
        lo, hi = self.lo, self.hi
        if math.isinf(lo) and math.isinf(hi):
            return -1.0, 1.0
        if math.isinf(hi):
            return lo, lo + 2.0
        if math.isinf(lo):
            return hi - 2.0, hi
        return lo, hi

    def to_json_data(self):
        return [self.lo, self.hi]


@attr.s(frozen=True)
class Exclusion(object):
    """The coordinate hyperplane ``x[index] == value``, removed from a domain."""

    index = attr.ib(validator=instance_of(int))
    value = attr.ib(default=0.0, converter=float)

    def distance(self, point):
        return abs(point[self.index] - self.value)

    def side(self, point):
        return np.sign(point[self.index] - self.value)


@attr.s(frozen=True)
class Domain(object):
    """Open coordinate box with excluded coordinate hyperplanes.

    :param bounds: one :class:`Interval` per coordinate
    :param exclusions: :class:`Exclusion` hyperplanes removed from the box
    :param sample_box: intervals random points are drawn from; defaults to
        a finite part of ``bounds``
    """

    bounds = attr.ib(converter=tuple, validator=is_list_of(Interval))
    exclusions = attr.ib(default=(), converter=tuple,
                         validator=is_list_of(Exclusion))
    sample_box = attr.ib(default=None, converter=attr.converters.optional(tuple))

    @classmethod
    def unbounded(cls, dim):
        return cls(bounds=[Interval() for _ in range(dim)])

    @property
    def dim(self):
        return len(self.bounds)

    def contains(self, point, margin=0.0):
        if not all(np.isfinite(point)):
            return False
        if not all(b.contains(x) for b, x in zip(self.bounds, point)):
            return False
        return all(e.distance(point) > margin for e in self.exclusions)

    def crosses_exclusion(self, a, b):
        return any(e.side(a) != e.side(b) for e in self.exclusions)

    def sampling_ranges(self):
        box = self.sample_box or self.bounds
        return [interval.sampling_range() for interval in box]


def sample_points(domain, count, rng):
    """Draw ``count`` points uniformly from the sampling box of ``domain``.

    Points closer than :data:`EXCLUSION_MARGIN` to an excluded hyperplane
    are rejected and redrawn.
    """
    ranges = np.array(domain.sampling_ranges(), dtype=float)
    points = []
    attempts = 0
    while len(points) < count:
        attempts += 1
        if attempts > MAX_SAMPLING_ATTEMPTS * max(count, 1):
            raise ValueError('could not draw points from the sampling box')
        point = rng.uniform(ranges[:, 0], ranges[:, 1])
        if domain.contains(point, margin=EXCLUSION_MARGIN):
            points.append(point)
    return points


"""
Charts and fields
"""


def _expression_matrix(rows):
    return tuple(tuple(row) for row in rows)


@attr.s(frozen=True)
class ChartManifold(object):
    """A Riemannian manifold covered by one chart.

    :param name: identifier used by manifests and reports
    :param coords: coordinate names
    :param metric: square matrix of :class:`ScalarFieldExpr` over ``coords``
    :param domain: open :class:`Domain` of the chart
    """

    name = attr.ib(validator=is_identifier)
    coords = attr.ib(converter=tuple)
    metric = attr.ib(converter=_expression_matrix, validator=is_square_matrix)
    domain = attr.ib(
        default=attr.Factory(
            lambda self: Domain.unbounded(len(self.coords)), takes_self=True),
        validator=instance_of(Domain))

    @coords.validator
    def _check_coords(self, attribute, value):
        for name in value:
            is_identifier(self, attribute, name)
            if name in RESERVED_NAMES:
                raise ValueError(
                    "coordinate '{}' clashes with a function or constant"
                    .format(name))
        if len(set(value)) != len(value):
            raise ValueError('coordinate names should be unique')

    @metric.validator
    def _check_metric(self, attribute, value):
        if len(value) != len(self.coords):
            raise ValueError('metric should be {0}x{0}'.format(len(self.coords)))
        for row in value:
            _check_expressions(self, row)

    @domain.validator
    def _check_domain(self, attribute, value):
        if value.dim != len(self.coords):
            raise ValueError('domain should have one interval per coordinate')

    @property
    def dim(self):
        return len(self.coords)

    def parse(self, text):
        return parse_expr(text, self.coords)

    def check_point(self, point):
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            raise ValueError('{} expects {} coordinates, got shape {}'.format(
                self.name, self.dim, point.shape))
        if not self.domain.contains(point):
            raise PointOutsideDomainError(
                'point {} is outside the domain of {}'.format(
                    list(point), self.name))
        return point


def _check_expressions(manifold, expressions):
    for expr in expressions:
        if not isinstance(expr, ScalarFieldExpr):
            raise ValueError('expected expressions, got {!r}'.format(expr))
        if expr.coords != manifold.coords:
            raise ValueError(
                "expression '{}' is not over the coordinates {}".format(
                    expr.text, manifold.coords))


@attr.s(frozen=True)
class VectorFieldSpec(object):
    """Contravariant vector field given by component expressions."""

    components = attr.ib(converter=tuple, validator=is_list_of(ScalarFieldExpr))

    @classmethod
    def parse(cls, texts, coords):
        return cls(components=[parse_expr(text, coords) for text in texts])

    @property
    def dim(self):
        return len(self.components)

    @property
    def coords(self):
        return self.components[0].coords

    def at(self, point):
        return np.array([evaluate(c, point) for c in self.components])

    def jacobian(self, point):
        """Values and ``J[k, i] = d_i V^k`` at ``point``."""
        jets = [eval_jet1(c, point) for c in self.components]
        values = np.array([value for value, _ in jets])
        return values, np.array([grad for _, grad in jets])

    def to_json_data(self):
        return [c.text for c in self.components]


def evaluate_matrix(rows, point):
    return np.array([[evaluate(e, point) for e in row] for row in rows])


def matrix_jacobian(rows, point):
    """Values and ``dT[k, l, i] = d_i T^k_l`` of a matrix of expressions."""
    n = len(rows)
    values = np.zeros((n, n))
    derivatives = np.zeros((n, n, n))
    for k, row in enumerate(rows):
        for l, expr in enumerate(row):
            values[k, l], derivatives[k, l] = eval_jet1(expr, point)
    return values, derivatives


"""
Metric and connection
"""


def inner(metric, a, b):
    return float(np.asarray(a) @ metric @ np.asarray(b))


def norm(metric, a):
    return math.sqrt(max(inner(metric, a, a), 0.0))


def metric_at(manifold, point):
    g = evaluate_matrix(manifold.metric, point)
    return 0.5 * (g + g.T)


def metric_jet(manifold, point):
    """Metric and its first derivatives, ``dg[k, i, j] = d_k g_ij``."""
    n = manifold.dim
    g = np.zeros((n, n))
    dg = np.zeros((n, n, n))
    for i in range(n):
        for j in range(i, n):
            value, grad = eval_jet1(manifold.metric[i][j], point)
            if i != j:
                other, other_grad = eval_jet1(manifold.metric[j][i], point)
                value, grad = 0.5 * (value + other), 0.5 * (grad + other_grad)
            g[i, j] = g[j, i] = value
            dg[:, i, j] = dg[:, j, i] = grad
    return g, dg


def inverse_metric(metric):
    """Invert a metric matrix by LU factorization with partial pivoting."""
    condition = np.linalg.cond(metric)
    if not np.isfinite(condition) or condition > SINGULAR_CONDITION:
        raise SingularMetricError(
            'metric condition number {:.3g} exceeds {:.0g}'.format(
                condition, SINGULAR_CONDITION))
    return np.linalg.solve(metric, np.eye(len(metric)))


def connection(manifold, point):
    """Metric and Christoffel symbols ``gamma[k, i, j]`` at ``point``."""
    g, dg = metric_jet(manifold, point)
    g_inv = inverse_metric(g)
    lowered = 0.5 * (
        np.einsum('ijl->lij', dg) + np.einsum('jil->lij', dg) - dg)
    gamma = np.einsum('kl,lij->kij', g_inv, lowered)
    return g, 0.5 * (gamma + gamma.transpose(0, 2, 1))


def christoffel(manifold, point):
    """Christoffel symbols of the Levi-Civita connection at ``point``."""
    return connection(manifold, manifold.check_point(point))[1]


def covariant_derivative_vector(manifold, V, W, point):
    """``(nabla_W V)^k = W^i d_i V^k + gamma^k_ij W^i V^j``."""
    point = manifold.check_point(point)
    W = np.asarray(W, dtype=float)
    values, jac = V.jacobian(point)
    gamma = connection(manifold, point)[1]
    return jac @ W + np.einsum('kij,i,j->k', gamma, W, values)


def covariant_derivative_tensor11(manifold, T, W, point):
    """Covariant derivative of the (1,1)-tensor field ``T`` along ``W``."""
    point = manifold.check_point(point)
    W = np.asarray(W, dtype=float)
    values, dT = matrix_jacobian(T, point)
    gamma = connection(manifold, point)[1]
    return (
        np.einsum('kli,i->kl', dT, W)
        + np.einsum('kim,i,ml->kl', gamma, W, values)
        - np.einsum('mil,i,km->kl', gamma, W, values))


def lie_bracket(manifold, X, Y, point):
    """``[X, Y]^k = X^i d_i Y^k - Y^i d_i X^k``."""
    point = manifold.check_point(point)
    x, jac_x = X.jacobian(point)
    y, jac_y = Y.jacobian(point)
    return jac_y @ x - jac_x @ y


def validate_metric(manifold, rng, count=METRIC_SAMPLE_COUNT):
    """Check symmetry and positive definiteness at random domain points."""
    for point in sample_points(manifold.domain, count, rng):
        g = evaluate_matrix(manifold.metric, point)
        asymmetry = np.max(np.abs(g - g.T))
        if asymmetry >= METRIC_SYMMETRY_TOL:
            raise MetricError(
                'metric of {} is not symmetric at {} (residual {:.3g})'
                .format(manifold.name, list(point), asymmetry))
        smallest = np.min(np.linalg.eigvalsh(0.5 * (g + g.T)))
        if smallest <= METRIC_EIGENVALUE_FLOOR:
            raise MetricError(
                'metric of {} is not positive definite at {} '
                '(smallest eigenvalue {:.3g})'.format(
                    manifold.name, list(point), smallest))


def orthonormalize(frame, metric):
    """Gram-Schmidt in ``metric``; the first direction is kept.

    :param frame: linearly independent vectors
    :param metric: metric matrix at the point the vectors live at
    """
    vectors = [np.asarray(v, dtype=float) for v in frame]
    if not vectors:
        return []
    stacked = np.array(vectors)
    gram = stacked @ metric @ stacked.T
    dependent = np.min(np.linalg.eigvalsh(gram)) <= GRAM_EIGENVALUE_FLOOR
    result = []
    for index, vector in enumerate(vectors):
        w = vector.copy()
        # twice, for orthogonality at round-off level
        for _ in range(2):
            for e in result:
                w = w - inner(metric, e, w) * e
        size = inner(metric, w, w)
        if size <= GRAM_EIGENVALUE_FLOOR * max(inner(metric, vector, vector),
                                               GRAM_EIGENVALUE_FLOOR):
            raise RankDeficiencyError(index)
        result.append(w / math.sqrt(size))
    if dependent:
        raise RankDeficiencyError(len(vectors) - 1)
    return result


"""
Geodesics
"""


@attr.s(frozen=True)
class GeodesicSample(object):
    s = attr.ib()
    point = attr.ib()
    velocity = attr.ib()
    metric_norm = attr.ib()


@attr.s
class GeodesicTrace(object):
    """Samples of a geodesic at equally spaced parameter values."""

    manifold = attr.ib(validator=instance_of(ChartManifold))
    step = attr.ib()
    samples = attr.ib(default=attr.Factory(list))

    @property
    def s(self):
        return np.array([sample.s for sample in self.samples])

    @property
    def points(self):
        return np.array([sample.point for sample in self.samples])

    @property
    def velocities(self):
        return np.array([sample.velocity for sample in self.samples])

    @property
    def metric_norms(self):
        return np.array([sample.metric_norm for sample in self.samples])

    @property
    def norm_drift(self):
        norms = self.metric_norms
        reference = norms[0]
        if reference == 0.0:
            return float(np.max(np.abs(norms)))
        return float(np.max(np.abs(norms - reference)) / reference)

    def to_json_data(self):
        return {
            'manifold': self.manifold.name,
            'samples': len(self.samples),
            'step': self.step,
            'start': list(self.samples[0].point),
            'end': list(self.samples[-1].point),
            'normDrift': self.norm_drift,
        }


def _geodesic_rhs(manifold, state):
    n = manifold.dim
    x, v = state[:n], state[n:]
    gamma = connection(manifold, x)[1]
    return np.concatenate([v, -np.einsum('kij,i,j->k', gamma, v, v)])


def integrate_geodesic(manifold, p0, v0, length, step):
    """Integrate the geodesic through ``p0`` with velocity ``v0``.

    Classic fixed-step RK4 on ``x' = v, v'^k = -gamma^k_ij v^i v^j``. The
    number of steps is ``round(length / step)``; the step is then adjusted
    so the last sample lands at ``length`` exactly.
    """
    if not step > 0:
        raise ValueError('step should be positive, got {}'.format(step))
    p0 = manifold.check_point(p0)
    v0 = np.asarray(v0, dtype=float)
    if v0.shape != p0.shape:
        raise ValueError('velocity should have {} components'.format(len(p0)))
    if length < 0:
        raise ValueError('length should be non-negative')

    count = int(round(length / step))
    h = length / count if count else step
    n = manifold.dim
    domain = manifold.domain

    def sample(s, state):
        x, v = state[:n], state[n:]
        return GeodesicSample(
            s=s, point=x.copy(), velocity=v.copy(),
            metric_norm=norm(metric_at(manifold, x), v))

    state = np.concatenate([p0, v0])
    trace = GeodesicTrace(manifold=manifold, step=h, samples=[sample(0.0, state)])
    start_norm = trace.samples[0].metric_norm

    def exit_error(s):
        return DomainExitError(
            'geodesic on {} left the domain near s={:.6g}'.format(
                manifold.name, s), trace)

    for index in range(1, count + 1):
        s = index * h
        stages = []
        stage_state = state
        for weight in (0.0, 0.5, 0.5, 1.0):
            if stages:
                stage_state = state + weight * h * stages[-1]
            x = stage_state[:n]
            if not domain.contains(x) or domain.crosses_exclusion(state[:n], x):
                raise exit_error(s)
            stages.append(_geodesic_rhs(manifold, stage_state))
        k1, k2, k3, k4 = stages
        new_state = state + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        x = new_state[:n]
        if not domain.contains(x) or domain.crosses_exclusion(state[:n], x):
            raise exit_error(s)
        state = new_state
        current = sample(s, state)
        if start_norm > 0.0:
            drift = abs(current.metric_norm - start_norm) / start_norm
        else:
            drift = current.metric_norm
        if drift > NORM_DRIFT_LIMIT:
            raise StepTooLargeError(
                'speed drifted by {:.3g} at s={:.6g}; reduce the step below {}'
                .format(drift, s, h))
        trace.samples.append(current)
    return trace
