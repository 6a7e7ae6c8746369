"""Anti-invariant Riemannian maps to contact manifolds and Clairaut checks.

Quantities on the image of a map are computed from its Jacobian. Off the
image, range and (range)-perp are only known through closed-form frame
fields declared on the codomain (:class:`DeclaredSplit`); those are
cross-checked against the pointwise decomposition wherever both exist.
"""

import math
import warnings

import attr
import numpy as np
from attr.validators import in_, instance_of, optional

from clairautlib.contact import estimate_type
from clairautlib.expr import ScalarFieldExpr, eval_jet1, evaluate
from clairautlib.geometry import (
    VectorFieldSpec, connection, covariant_derivative_tensor11,
    covariant_derivative_vector, evaluate_matrix, inner, integrate_geodesic,
    inverse_metric, lie_bracket, norm, sample_points,
)
from clairautlib.rmap import (
    NonOrthogonalVectorError, SmoothMapSpec, apply_shape_operator,
    local_data, projector,
)
from clairautlib.validators import is_identifier, is_list_of


REEB_RATIO = 1e-6
ORTHOGONALITY_TOLERANCE = 1e-9
Z_RESIDUAL_LIMIT = 1e-8
FRAME_MATCH_TOLERANCE = 1e-8
GRAM_FLOOR = 1e-10
CERTIFIED_DRIFT = 1e-6
DEFINITION_SAMPLES = 11
FIT_CONSTANT = 'fit-constant'


class StructureMismatchError(Exception):
    """Raised when a contact structure does not live on a map's codomain."""


class FrameSpanError(Exception):
    """Raised when declared frame fields do not span a distribution."""


class FrameMismatchError(Exception):
    """Raised when declared frames disagree with the computed decomposition."""


class DegenerateTraceError(Exception):
    """Raised when a trace has zero velocity or too few samples."""


class UncertifiedGeodesicError(Exception):
    """Raised when a domain curve is not a geodesic to the required accuracy."""


class ReebPositionWarning(UserWarning):
    """The Reeb field is not horizontal where a check assumes it is."""


def _check_structure(smooth_map, structure):
    if structure.manifold != smooth_map.codomain_manifold:
        raise StructureMismatchError(
            '{} lives on {}, but {} maps to {}'.format(
                structure.name, structure.manifold.name, smooth_map.name,
                smooth_map.codomain_manifold.name))


def _extend_basis(basis, candidates, metric, floor=1e-8):
    """Orthonormal vectors extending ``basis`` by the span of ``candidates``."""
    result = list(basis)
    added = []
    for vector in candidates:
        w = np.asarray(vector, dtype=float).copy()
        for _ in range(2):
            for e in result:
                w = w - inner(metric, e, w) * e
        size = norm(metric, w)
        if size > floor:
            result.append(w / size)
            added.append(w / size)
    return added


"""
Anti-invariance
"""


@attr.s
class AntiInvariantSplit(object):
    """(range)-perp = psi(range) + mu at one image point."""

    point = attr.ib()
    metric = attr.ib()
    psi = attr.ib()
    range_frame = attr.ib()
    rperp_frame = attr.ib()
    is_anti_invariant = attr.ib()
    residual = attr.ib()
    psi_range_frame = attr.ib()
    mu_frame = attr.ib()
    reeb_position = attr.ib(validator=in_(('horizontal', 'vertical', 'mixed')))
    reeb_norms = attr.ib()
    mu_invariance_residual = attr.ib()
    gram_determinant = attr.ib()

    @property
    def range_projector(self):
        return projector(self.range_frame, self.metric)

    def to_json_data(self):
        return {
            'point': list(self.point),
            'antiInvariant': self.is_anti_invariant,
            'residual': self.residual,
            'reebPosition': self.reeb_position,
            'reebNorms': self.reeb_norms,
            'muDimension': len(self.mu_frame),
            'muInvarianceResidual': self.mu_invariance_residual,
            'gramDeterminant': self.gram_determinant,
        }


def anti_invariance_residual(psi, metric, range_frame):
    """Largest range component of psi R over an orthonormal range frame."""
    P = projector(range_frame, metric)
    return max((norm(metric, P @ (psi @ R)) for R in range_frame), default=0.0)


def anti_invariance_check(smooth_map, structure, p, tol=1e-8, range_frame=None):
    """Check psi(range) inside (range)-perp at ``pi(p)`` and split (range)-perp.

    :param range_frame: orthonormal range frame to use instead of the
        computed one
    """
    _check_structure(smooth_map, structure)
    local = local_data(smooth_map, p)
    at = structure.at(local.jet.image)
    g, psi = local.g2, at.psi
    decomposition = local.decomposition
    ranges = decomposition.range_frame if range_frame is None else [
        np.asarray(R, dtype=float) for R in range_frame]
    rperp = decomposition.rperp_frame
    residual = anti_invariance_residual(psi, g, ranges)

    perp = np.eye(len(g)) - projector(ranges, g)
    psi_range = _extend_basis([], [perp @ (psi @ R) for R in ranges], g)
    mu = _extend_basis(psi_range, rperp, g)
    spanning = psi_range + mu
    if spanning:
        stacked = np.array(spanning)
        gram_determinant = float(np.linalg.det(stacked @ g @ stacked.T))
    else:
        gram_determinant = 1.0

    xi = at.xi
    total = norm(g, xi)
    range_part = norm(g, projector(ranges, g) @ xi)
    perp_part = norm(g, perp @ xi)
    if range_part <= REEB_RATIO * total:
        position = 'horizontal'
    elif perp_part <= REEB_RATIO * total:
        position = 'vertical'
    else:
        position = 'mixed'
    P_mu = projector(mu, g)
    mu_invariance = max(
        (norm(g, (np.eye(len(g)) - P_mu) @ (psi @ v)) for v in mu),
        default=0.0)

    return AntiInvariantSplit(
        point=local.jet.image,
        metric=g,
        psi=psi,
        range_frame=ranges,
        rperp_frame=rperp,
        is_anti_invariant=residual < tol,
        residual=residual,
        psi_range_frame=psi_range,
        mu_frame=mu,
        reeb_position=position,
        reeb_norms={
            'range': range_part,
            'perp': perp_part,
            'mu': norm(g, P_mu @ xi),
            'total': total,
        },
        mu_invariance_residual=mu_invariance,
        gram_determinant=gram_determinant,
    )


def _require_perp(range_projector, metric, V):
    V = np.asarray(V, dtype=float)
    along = norm(metric, range_projector @ V)
    if along > ORTHOGONALITY_TOLERANCE * (1.0 + norm(metric, V)):
        raise NonOrthogonalVectorError(
            'vector {} has a component of norm {:.3g} in range'.format(
                list(V), along))
    return V


def bc_split(split, V):
    """``psi V = BV + CV`` with BV in range and CV in (range)-perp."""
    P = split.range_projector
    V = _require_perp(P, split.metric, V)
    image = split.psi @ V
    BV = P @ image
    return BV, image - BV


"""
Declared frame fields on the codomain
"""


@attr.s(frozen=True)
class DeclaredSplit(object):
    """Closed-form frame fields for range and (range)-perp of a map.

    :param variant: label of the printed variant these frames encode
    """

    name = attr.ib(validator=is_identifier)
    smooth_map = attr.ib(validator=instance_of(SmoothMapSpec))
    range_fields = attr.ib(converter=tuple, validator=is_list_of(VectorFieldSpec))
    perp_fields = attr.ib(converter=tuple, validator=is_list_of(VectorFieldSpec))
    variant = attr.ib(default='', validator=instance_of(str))

    def __attrs_post_init__(self):
        codomain = self.smooth_map.codomain_manifold
        fields = self.range_fields + self.perp_fields
        if len(fields) != codomain.dim:
            raise ValueError(
                '{} declares {} fields, {} has dimension {}'.format(
                    self.name, len(fields), codomain.name, codomain.dim))
        for field in fields:
            if field.coords != codomain.coords:
                raise ValueError('frame fields of {} are not over {}'.format(
                    self.name, codomain.name))

    @property
    def manifold(self):
        return self.smooth_map.codomain_manifold

    def at(self, q):
        q = self.manifold.check_point(q)
        g = evaluate_matrix(self.manifold.metric, q)
        g = 0.5 * (g + g.T)
        ranges, range_coefficients = _orthonormal_fields(
            self.range_fields, q, g, self.name)
        perps, perp_coefficients = _orthonormal_fields(
            self.perp_fields, q, g, self.name)
        return SplitAtPoint(
            point=q, metric=g, range_basis=ranges, perp_basis=perps,
            range_coefficients=range_coefficients,
            perp_coefficients=perp_coefficients, split=self)


def _orthonormal_fields(fields, q, metric, name):
    """Orthonormal basis of span(fields(q)) and the coefficient matrix.

    Row i of the coefficients gives basis i as a combination of the fields.
    """
    if not fields:
        return [], np.zeros((0, 0))
    values = np.array([field.at(q) for field in fields])
    gram = values @ metric @ values.T
    if np.min(np.linalg.eigvalsh(gram)) <= GRAM_FLOOR:
        raise FrameSpanError(
            'frame fields of {} are linearly dependent at {}'.format(
                name, list(q)))
    lower = np.linalg.cholesky(gram)
    coefficients = np.linalg.inv(lower)
    return list(coefficients @ values), coefficients


@attr.s
class SplitAtPoint(object):
    point = attr.ib()
    metric = attr.ib()
    range_basis = attr.ib()
    perp_basis = attr.ib()
    range_coefficients = attr.ib()
    perp_coefficients = attr.ib()
    split = attr.ib()

    @property
    def range_projector(self):
        return projector(self.range_basis, self.metric)

    @property
    def perp_projector(self):
        return projector(self.perp_basis, self.metric)

    def _nabla(self, field, X):
        return covariant_derivative_vector(
            self.split.manifold, field, X, self.point)

    def range_second_fundamental_form(self):
        """``S[i][j] = perp(nabla_{r_i} r_j)`` on the orthonormal range basis."""
        fields = self.split.range_fields
        raw = [[self.perp_projector @ self._nabla(Rb, Ra.at(self.point))
                for Rb in fields] for Ra in fields]
        C = self.range_coefficients
        k = len(fields)
        return [[sum(C[i, a] * C[j, b] * raw[a][b]
                     for a in range(k) for b in range(k))
                 for j in range(k)] for i in range(k)]

    def range_umbilical_fit(self):
        """Mean curvature H2 of range and the RMS misfit to umbilicity."""
        S = self.range_second_fundamental_form()
        k = len(S)
        if k == 0:
            return np.zeros(len(self.metric)), 0.0
        H2 = sum(S[i][i] for i in range(k)) / k
        misfits = []
        for i in range(k):
            for j in range(k):
                symmetric = 0.5 * (S[i][j] + S[j][i])
                expected = H2 if i == j else 0.0
                misfits.append(norm(self.metric, symmetric - expected))
        return H2, math.sqrt(float(np.mean(np.square(misfits))))

    def shape_operator(self, V, X):
        """``A_V X = -range(nabla_X V)``, V extended with constant coefficients."""
        V = _require_perp(self.range_projector, self.metric, V)
        fields = self.split.perp_fields
        if not fields:
            return np.zeros(len(self.metric))
        values = np.array([field.at(self.point) for field in fields]).T
        coefficients = np.linalg.lstsq(values, V, rcond=None)[0]
        derivative = sum(c * self._nabla(field, X)
                         for c, field in zip(coefficients, fields))
        return -(self.range_projector @ derivative)


def validate_declared_split(split, points, tol=FRAME_MATCH_TOLERANCE):
    """Largest projector mismatch between declared and computed frames.

    Both the range and the (range)-perp projectors are compared. Raises
    :class:`FrameMismatchError` above ``tol``.
    """
    mismatch = 0.0
    for p in points:
        local = local_data(split.smooth_map, p)
        declared = split.at(local.jet.image)
        difference = max(
            np.linalg.norm(declared.range_projector - local.range_projector),
            np.linalg.norm(declared.perp_projector - local.rperp_projector))
        mismatch = max(mismatch, float(difference))
        if difference > tol:
            raise FrameMismatchError(
                'declared frames {} ({}) disagree with range at {} '
                '(projector difference {:.3g})'.format(
                    split.name, split.variant or 'no variant',
                    list(local.jet.image), difference))
    return mismatch


"""
Clairaut geodesics
"""


@attr.s
class ClairautStart(object):
    point = attr.ib()
    velocity = attr.ib()
    domain_point = attr.ib(default=None)


def domain_starts(smooth_map, count, rng, perp_share=0.0):
    """Starts ``(pi(p), v0)`` for random p.

    ``v0`` is a unit vector whose range part is ``pi_*`` of a random
    horizontal vector and whose (range)-perp part has norm ``perp_share``,
    so that ``cos(theta) = perp_share`` at the start.
    """
    if not 0.0 <= perp_share < 1.0:
        raise ValueError('perp_share should be in [0, 1), got {}'.format(
            perp_share))
    starts = []
    for p in sample_points(smooth_map.domain_manifold.domain, count, rng):
        local = local_data(smooth_map, p)
        hker = local.decomposition.hker_frame
        if not hker:
            raise DegenerateTraceError('{} has rank 0 at {}'.format(
                smooth_map.name, list(p)))
        weights = rng.standard_normal(len(hker))
        along = local.push(np.array(hker).T @ weights)
        velocity = along / norm(local.g2, along)
        rperp = local.decomposition.rperp_frame
        if perp_share > 0.0:
            if not rperp:
                raise DegenerateTraceError(
                    '{} has no (range)-perp at {}'.format(
                        smooth_map.name, list(p)))
            across = np.array(rperp).T @ rng.standard_normal(len(rperp))
            across = across / norm(local.g2, across)
            velocity = (math.sqrt(1.0 - perp_share ** 2) * velocity
                        + perp_share * across)
        starts.append(ClairautStart(
            point=local.jet.image, velocity=velocity, domain_point=p))
    return starts


@attr.s
class ClairautGeodesicTrace(object):
    base = attr.ib()
    theta = attr.ib()
    invariant = attr.ib()
    h_field = attr.ib()
    drift = attr.ib()

    def to_json_data(self):
        return {
            'geodesic': self.base,
            'theta': [float(np.min(self.theta)), float(np.max(self.theta))],
            'invariantStart': float(self.invariant[0]),
            'invariantEnd': float(self.invariant[-1]),
            'drift': self.drift,
            'h': self.h_field if isinstance(self.h_field, str)
            else self.h_field.text,
        }


def _h_value(h, point):
    return 0.0 if h is None else evaluate(h, point)


def _h_gradient(h, point, metric):
    if h is None:
        return np.zeros(len(point))
    return inverse_metric(metric) @ eval_jet1(h, point)[1]


def _drift(values):
    reference = values[0]
    spread = float(np.max(np.abs(values - reference)))
    return spread if reference == 0.0 else spread / abs(reference)


@attr.s
class ClairautCheck(object):
    """Invariant drift along geodesics and the umbilical characterization."""

    traces = attr.ib()
    tolerance = attr.ib()
    umbilical_residual = attr.ib()
    gradient_residual = attr.ib()
    definition_samples = attr.ib()
    variant = attr.ib(default='')

    @property
    def max_drift(self):
        return max((t.drift for t in self.traces), default=0.0)

    @property
    def conserved(self):
        return self.max_drift < self.tolerance

    @property
    def umbilical_characterization(self):
        return (self.umbilical_residual < self.tolerance
                and self.gradient_residual < self.tolerance)

    def to_json_data(self):
        return {
            'variant': self.variant,
            'maxDrift': self.max_drift,
            'conserved': self.conserved,
            'umbilicalResidual': self.umbilical_residual,
            'gradientResidual': self.gradient_residual,
            'umbilicalCharacterization': self.umbilical_characterization,
            'traces': self.traces,
            'samples': self.definition_samples,
        }


def clairaut_trace(split, h, start, length, step):
    """Integrate a codomain geodesic and sample the Clairaut invariant."""
    manifold = split.manifold
    trace = integrate_geodesic(
        manifold, start.point, start.velocity, length, step)
    theta, invariant = [], []
    for sample in trace.samples:
        at = split.at(sample.point)
        speed = norm(at.metric, sample.velocity)
        if speed == 0.0:
            raise DegenerateTraceError(
                'zero velocity at {}'.format(list(sample.point)))
        U = at.perp_projector @ sample.velocity
        cos_theta = min(max(norm(at.metric, U) / speed, 0.0), 1.0)
        angle = math.acos(cos_theta)
        theta.append(angle)
        invariant.append(math.exp(_h_value(h, sample.point)) * math.sin(angle))
    invariant = np.array(invariant)
    return ClairautGeodesicTrace(
        base=trace, theta=np.array(theta), invariant=invariant,
        h_field=FIT_CONSTANT if h is None else h, drift=_drift(invariant))


def clairaut_geodesic_check(smooth_map, structure, h, starts, length, step,
                            split, tol=1e-6):
    """Clairaut invariant along geodesics plus ``H2 = -grad h``.

    :param h: :class:`ScalarFieldExpr` on the codomain, or ``None`` (or
        ``'fit-constant'``) for the best constant, which is zero
    :param starts: :class:`ClairautStart` list on the codomain
    :param split: :class:`DeclaredSplit` giving range off the image
    """
    _check_structure(smooth_map, structure)
    if h == FIT_CONSTANT:
        h = None
    if h is not None and not isinstance(h, ScalarFieldExpr):
        raise TypeError('h should be an expression, None or {!r}'.format(
            FIT_CONSTANT))
    traces = [clairaut_trace(split, h, start, length, step) for start in starts]

    samples = []
    umbilical, gradient = 0.0, 0.0
    for trace in traces:
        points = trace.base.points
        picks = np.unique(np.linspace(
            0, len(points) - 1, DEFINITION_SAMPLES).round().astype(int))
        for index in picks:
            at = split.at(points[index])
            H2, misfit = at.range_umbilical_fit()
            grad_h = _h_gradient(h, at.point, at.metric)
            residual = norm(at.metric, H2 + grad_h)
            umbilical = max(umbilical, misfit)
            gradient = max(gradient, residual)
            samples.append({
                'point': list(at.point),
                'H2': list(H2),
                'gradH': list(grad_h),
                'residual': residual,
            })
    return ClairautCheck(
        traces=traces, tolerance=tol, umbilical_residual=umbilical,
        gradient_residual=gradient, definition_samples=samples,
        variant=split.variant)


"""
Residual evaluators
"""


@attr.s(frozen=True)
class Term(object):
    """One term of a residual equation.

    ``coefficient`` names the structure function the term carries, so the
    corollary forms are the same list with those terms dropped.
    """

    label = attr.ib(validator=instance_of(str))
    value = attr.ib(eq=False)
    coefficient = attr.ib(default=None, validator=optional(in_(('alpha', 'beta'))))

    def to_json_data(self):
        value = self.value
        if isinstance(value, np.ndarray):
            value = [float(x) for x in value]
        return {'label': self.label, 'value': value,
                'coefficient': self.coefficient}


def corollary_terms(terms, drop=()):
    """Terms left once the coefficients in ``drop`` vanish."""
    return [term for term in terms if term.coefficient not in drop]


def total(terms):
    return sum((term.value for term in terms), 0.0)


def covariant_derivative_along(gammas, velocities, values, step):
    """``D/ds`` of a vector field sampled along a curve.

    Centered differences of the components plus the connection term.
    """
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        raise DegenerateTraceError('a trace needs at least two samples')
    order = 2 if len(values) >= 3 else 1
    derivative = np.gradient(values, step, axis=0, edge_order=order)
    return np.array([
        d + np.einsum('kij,i,j->k', gamma, v, f)
        for d, gamma, v, f in zip(derivative, gammas, velocities, values)])


def _type_at(structure, point, type_override):
    if type_override is not None:
        return type_override
    if structure.declared_type is not None:
        return structure.declared_type.at(point)
    estimate = estimate_type(structure, point)
    return estimate.alpha, estimate.beta


@attr.s
class Theorem31Sample(object):
    s = attr.ib()
    range_terms = attr.ib()
    perp_terms = attr.ib()
    range_residual = attr.ib()
    perp_residual = attr.ib()
    acceleration = attr.ib()
    shape_operator_term = attr.ib()
    z_residual = attr.ib()

    @property
    def z_defined(self):
        return self.z_residual <= Z_RESIDUAL_LIMIT


@attr.s
class Theorem31Report(object):
    samples = attr.ib()
    tolerance = attr.ib()

    @property
    def max_residual(self):
        return max((max(s.range_residual, s.perp_residual)
                    for s in self.samples), default=0.0)

    @property
    def max_acceleration(self):
        return max((s.acceleration for s in self.samples), default=0.0)

    @property
    def one_sided(self):
        """Samples where exactly one side of the equivalence vanishes."""
        return [s.s for s in self.samples
                if (max(s.range_residual, s.perp_residual) < self.tolerance)
                != (s.acceleration < self.tolerance)]

    @property
    def equivalent(self):
        return not self.one_sided

    def to_json_data(self):
        return {
            'samples': len(self.samples),
            'maxResidual': self.max_residual,
            'maxAcceleration': self.max_acceleration,
            'oneSided': self.one_sided,
            'equivalent': self.equivalent,
            'zUndefined': [s.s for s in self.samples if not s.z_defined],
        }


def thm31_residuals(smooth_map, structure, gamma, type_override=None,
                    tol=1e-5):
    """Range and (range)-perp parts of the geodesic condition for pi o gamma.

    Both parts are built from the terms of ``psi(nabla Omega' Omega')``,
    split along ``Omega' = pi_* W + U``. Derivatives along the image curve
    are taken on the trace, so they also hold the ``nabla_U`` parts.
    """
    _check_structure(smooth_map, structure)
    if gamma.norm_drift > CERTIFIED_DRIFT:
        raise UncertifiedGeodesicError(
            'geodesic speed drifts by {:.3g}'.format(gamma.norm_drift))

    rows = []
    for sample in gamma.samples:
        local = local_data(smooth_map, sample.point)
        at = structure.at(local.jet.image)
        P_r, P_p = local.range_projector, local.rperp_projector
        if norm(local.g2, P_r @ at.xi) > REEB_RATIO * norm(local.g2, at.xi):
            warnings.warn('Reeb field is not horizontal at {}'.format(
                list(local.jet.image)), ReebPositionWarning, stacklevel=2)
        J = local.jet.jacobian
        hker = local.decomposition.hker_frame
        velocity = sample.velocity
        omega_dot = J @ velocity
        W = projector(hker, local.g1) @ velocity
        pushed_W = J @ W
        U = P_p @ omega_dot
        psi_U = at.psi @ U
        BU = P_r @ psi_U
        CU = psi_U - BU
        if hker:
            H = np.array(hker).T
            z = np.linalg.lstsq(J @ H, BU, rcond=None)[0]
            Z = H @ z
        else:
            Z = np.zeros(len(velocity))
        pushed_Z = J @ Z
        psi_W = at.psi @ pushed_W
        alpha, beta = _type_at(structure, local.jet.image, type_override)
        rows.append(dict(
            local=local, at=at, omega_dot=omega_dot, W=W, Z=Z,
            pushed_W=pushed_W, pushed_Z=pushed_Z, U=U, BU=BU, CU=CU,
            psi_W=psi_W, alpha=alpha, beta=beta,
            eta_U=float(at.eta @ U),
            z_residual=norm(local.g2, pushed_Z - BU),
        ))

    gammas = [row['local'].gamma2 for row in rows]
    velocities = [row['omega_dot'] for row in rows]
    d_psi_W = covariant_derivative_along(
        gammas, velocities, [row['psi_W'] for row in rows], gamma.step)
    d_CU = covariant_derivative_along(
        gammas, velocities, [row['CU'] for row in rows], gamma.step)
    d_BU = covariant_derivative_along(
        gammas, velocities, [row['BU'] for row in rows], gamma.step)

    samples = []
    for index, row in enumerate(rows):
        local = row['local']
        P_r, P_p = local.range_projector, local.rperp_projector
        alpha, beta, eta_U = row['alpha'], row['beta'], row['eta_U']
        speed_squared = inner(local.g2, row['omega_dot'], row['omega_dot'])
        range_terms = [
            Term('-A_{psi pi*W} pi*W + range(nabla_U psi pi*W)',
                 P_r @ d_psi_W[index]),
            Term('-A_{CU} pi*W + range(nabla_U CU)', P_r @ d_CU[index]),
            Term('pi*(H nabla_W Z) + range(nabla_U pi*Z)', P_r @ d_BU[index]),
            Term('eta(U) alpha pi*W', eta_U * alpha * row['pushed_W'], 'alpha'),
            Term('eta(U) beta pi*Z', eta_U * beta * row['pushed_Z'], 'beta'),
        ]
        perp_terms = [
            Term('nabla^perp psi(pi*W)', P_p @ d_psi_W[index]),
            Term('nabla^perp CU', P_p @ d_CU[index]),
            Term('(nabla pi*)(W, Z) + perp(nabla_U pi*Z)', P_p @ d_BU[index]),
            Term('-alpha |Omega\'|^2 xi',
                 -alpha * speed_squared * row['at'].xi, 'alpha'),
            Term('eta(U) alpha U', eta_U * alpha * row['U'], 'alpha'),
            Term('eta(U) beta psi pi*W', eta_U * beta * row['psi_W'], 'beta'),
            Term('eta(U) beta CU', eta_U * beta * row['CU'], 'beta'),
        ]
        velocity = gamma.samples[index].velocity
        acceleration = local.second_fundamental_form(velocity, velocity)
        shape_term = -apply_shape_operator(
            local, P_p @ row['psi_W'], row['pushed_W'])
        samples.append(Theorem31Sample(
            s=gamma.samples[index].s,
            range_terms=range_terms,
            perp_terms=perp_terms,
            range_residual=norm(local.g2, total(range_terms)),
            perp_residual=norm(local.g2, total(perp_terms)),
            acceleration=norm(local.g2, acceleration),
            shape_operator_term=shape_term,
            z_residual=row['z_residual'],
        ))
    return Theorem31Report(samples=samples, tolerance=tol)


@attr.s
class Theorem32Sample(object):
    """Both sides at one sample.

    ``angle_rate`` is ``g2(nabla U, U)``, measured along the geodesic. The
    right-hand side is meant to equal it whatever h is.
    """

    s = attr.ib()
    lhs = attr.ib()
    rhs_terms = attr.ib()
    angle_rate = attr.ib(default=0.0)

    @property
    def residual(self):
        return abs(self.lhs - total(self.rhs_terms))

    @property
    def derivation_residual(self):
        return abs(self.angle_rate - total(self.rhs_terms))

    def to_json_data(self):
        return {'s': self.s, 'lhs': self.lhs, 'rhs': self.rhs_terms,
                'residual': self.residual, 'angleRate': self.angle_rate,
                'derivationResidual': self.derivation_residual}


@attr.s
class Theorem32Report(object):
    samples = attr.ib()
    tolerance = attr.ib()

    @property
    def max_residual(self):
        return max((s.residual for s in self.samples), default=0.0)

    @property
    def max_derivation_residual(self):
        return max((s.derivation_residual for s in self.samples), default=0.0)

    @property
    def passed(self):
        return self.max_residual < self.tolerance

    def to_json_data(self):
        worst = max(self.samples, key=lambda s: s.residual, default=None)
        return {
            'samples': len(self.samples),
            'maxResidual': self.max_residual,
            'maxDerivationResidual': self.max_derivation_residual,
            'worst': worst,
        }


def thm32_residual(smooth_map, structure, h, trace, split, type_override=None,
                   tol=1e-6):
    """Both sides of the derivative of h along a Clairaut geodesic.

    Signed left-hand side and every right-hand term are kept separately.
    """
    _check_structure(smooth_map, structure)
    if h == FIT_CONSTANT:
        h = None
    base = trace.base
    rows = []
    for sample in base.samples:
        at_split = split.at(sample.point)
        at = structure.at(sample.point)
        P_r, P_p = at_split.range_projector, at_split.perp_projector
        omega_dot = sample.velocity
        pushed_W = P_r @ omega_dot
        U = P_p @ omega_dot
        psi_U = at.psi @ U
        BU = P_r @ psi_U
        alpha, beta = _type_at(structure, sample.point, type_override)
        rows.append(dict(
            split=at_split, at=at, omega_dot=omega_dot, pushed_W=pushed_W,
            U=U, psi_U=psi_U, BU=BU, CU=psi_U - BU,
            psi_W=at.psi @ pushed_W, alpha=alpha, beta=beta,
            h=_h_value(h, sample.point)))

    gammas = [connection(split.manifold, s.point)[1] for s in base.samples]
    velocities = [row['omega_dot'] for row in rows]
    d_psi_W = covariant_derivative_along(
        gammas, velocities, [row['psi_W'] for row in rows], base.step)
    h_values = np.array([row['h'] for row in rows])
    order = 2 if len(h_values) >= 3 else 1
    dh = np.gradient(h_values, base.step, edge_order=order)
    half_speeds = np.array([
        0.5 * inner(row['split'].metric, row['U'], row['U']) for row in rows])
    angle_rates = np.gradient(half_speeds, base.step, edge_order=order)

    samples = []
    for index, row in enumerate(rows):
        at_split = row['split']
        g = at_split.metric
        eta_U = float(row['at'].eta @ row['U'])
        perp_psi_W = at_split.perp_projector @ row['psi_W']
        shape = at_split.shape_operator(perp_psi_W, row['pushed_W'])
        rhs = [
            Term('g2(A_{psi pi*W} pi*W, pi*Z)', inner(g, shape, row['BU'])),
            Term('-g2(nabla^perp psi(pi*W), CU)',
                 -inner(g, at_split.perp_projector @ d_psi_W[index], row['CU'])),
            Term('-eta(U) alpha g1(W, Z)',
                 -eta_U * row['alpha'] * inner(g, row['pushed_W'], row['BU']),
                 'alpha'),
            Term('-eta(U) beta |psi U|^2',
                 -eta_U * row['beta'] * inner(g, row['psi_U'], row['psi_U']),
                 'beta'),
        ]
        lhs = inner(g, row['pushed_W'], row['pushed_W']) * float(dh[index])
        samples.append(Theorem32Sample(
            s=base.samples[index].s, lhs=lhs, rhs_terms=rhs,
            angle_rate=float(angle_rates[index])))
    return Theorem32Report(samples=samples, tolerance=tol)


@attr.s
class DichotomyReport(object):
    """Rank-one branch or h constant along psi(range) and range minimal."""

    ranks = attr.ib()
    h_residual = attr.ib()
    mean_curvature = attr.ib()
    tolerance = attr.ib()

    @property
    def vacuous(self):
        return all(rank <= 1 for rank in self.ranks)

    @property
    def passed(self):
        return self.vacuous or (self.h_residual < self.tolerance
                                and self.mean_curvature < self.tolerance)

    def to_json_data(self):
        return {
            'ranks': self.ranks,
            'vacuous': self.vacuous,
            'hAlongPsiRange': self.h_residual,
            'rangeMeanCurvature': self.mean_curvature,
            'passed': self.passed,
        }


def thm33_thm34_checks(smooth_map, structure, h, points, tol=1e-8):
    """Where dim(range) > 1: g2(grad h, psi pi_* W) and the range mean curvature."""
    _check_structure(smooth_map, structure)
    if h == FIT_CONSTANT:
        h = None
    ranks, h_residual, curvature = [], 0.0, 0.0
    for p in points:
        local = local_data(smooth_map, p)
        rank = local.decomposition.rank
        ranks.append(rank)
        if rank <= 1:
            continue
        q = local.jet.image
        psi = structure.at(q).psi
        grad_h = _h_gradient(h, q, local.g2)
        for R in local.decomposition.range_frame:
            h_residual = max(h_residual, abs(inner(local.g2, grad_h, psi @ R)))
        hker = local.decomposition.hker_frame
        mean = sum(local.rperp_projector @ local.second_fundamental_form(W, W)
                   for W in hker) / len(hker)
        curvature = max(curvature, norm(local.g2, mean))
    return DichotomyReport(ranks=ranks, h_residual=h_residual,
                           mean_curvature=curvature, tolerance=tol)


"""
Distributions given by frame fields
"""


@attr.s
class DistributionReport(object):
    residual = attr.ib()
    tolerance = attr.ib()
    points = attr.ib()

    @property
    def holds(self):
        return self.residual < self.tolerance

    def to_json_data(self):
        return {'residual': self.residual, 'tolerance': self.tolerance,
                'points': self.points, 'holds': self.holds}


def _normal_basis(frames, complement_frames, point, metric):
    values = [field.at(point) for field in frames]
    if values:
        stacked = np.array(values)
        gram = stacked @ metric @ stacked.T
        if np.min(np.linalg.eigvalsh(gram)) <= GRAM_FLOOR:
            raise FrameSpanError(
                'frame fields are linearly dependent at {}'.format(list(point)))
    tangent = _extend_basis([], values, metric)
    return _extend_basis(
        tangent, [field.at(point) for field in complement_frames], metric)


def integrability_check(manifold, frames, complement_frames, points, tol=1e-8):
    """Largest |g([X, Y], N)| for frame fields X, Y and normals N.

    ``holds`` on the report means the distribution is integrable.
    """
    residual = 0.0
    for point in points:
        point = manifold.check_point(point)
        metric = evaluate_matrix(manifold.metric, point)
        normals = _normal_basis(frames, complement_frames, point, metric)
        for i, X in enumerate(frames):
            for Y in frames[i + 1:]:
                bracket = lie_bracket(manifold, X, Y, point)
                for N in normals:
                    residual = max(residual, abs(inner(metric, bracket, N)))
    return DistributionReport(residual=residual, tolerance=tol,
                              points=len(points))


def totally_geodesic_check(manifold, frames, complement_frames, points,
                           tol=1e-8):
    """Largest |g(nabla_X Y, N)| for frame fields X, Y and normals N."""
    residual = 0.0
    for point in points:
        point = manifold.check_point(point)
        metric = evaluate_matrix(manifold.metric, point)
        normals = _normal_basis(frames, complement_frames, point, metric)
        for X in frames:
            direction = X.at(point)
            for Y in frames:
                value = covariant_derivative_vector(manifold, Y, direction, point)
                for N in normals:
                    residual = max(residual, abs(inner(metric, value, N)))
    return DistributionReport(residual=residual, tolerance=tol,
                              points=len(points))


@attr.s
class RangeIntegrabilityReport(object):
    """Bracket of range fields against (range)-perp and the psi-term.

    When range is integrable, ``g2(nabla^perp_X psi Y - nabla^perp_Y psi X,
    CU)`` has to vanish.
    """

    bracket = attr.ib()
    psi_term = attr.ib()
    pairs = attr.ib()
    tolerance = attr.ib()

    @property
    def integrable(self):
        return self.bracket < self.tolerance

    @property
    def vacuous(self):
        return self.pairs == 0 or not self.integrable

    @property
    def holds(self):
        return self.vacuous or self.psi_term < self.tolerance

    def to_json_data(self):
        return {
            'bracket': self.bracket,
            'psiTerm': self.psi_term,
            'pairs': self.pairs,
            'integrable': self.integrable,
            'vacuous': self.vacuous,
            'holds': self.holds,
        }


def range_integrability_check(split, structure, points, tol=1e-8):
    """Evaluate the integrability condition of range on codomain points."""
    manifold = split.manifold
    if structure.manifold != manifold:
        raise StructureMismatchError('{} does not live on {}'.format(
            structure.name, manifold.name))
    fields = split.range_fields
    bracket, psi_term, pairs = 0.0, 0.0, 0
    for q in points:
        at = split.at(q)
        g = at.metric
        psi = structure.at(at.point).psi
        P_r, P_p = at.range_projector, at.perp_projector

        def nabla_psi(X, Y):
            direction = X.at(at.point)
            return (covariant_derivative_tensor11(
                manifold, structure.psi, direction, at.point) @ Y.at(at.point)
                + psi @ covariant_derivative_vector(
                    manifold, Y, direction, at.point))

        for i, X in enumerate(fields):
            for Y in fields[i + 1:]:
                pairs += 1
                value = lie_bracket(manifold, X, Y, at.point)
                term = P_p @ (nabla_psi(X, Y) - nabla_psi(Y, X))
                for U in at.perp_basis:
                    image = psi @ U
                    CU = image - P_r @ image
                    bracket = max(bracket, abs(inner(g, value, U)))
                    psi_term = max(psi_term, abs(inner(g, term, CU)))
    return RangeIntegrabilityReport(
        bracket=bracket, psi_term=psi_term, pairs=pairs, tolerance=tol)
