"""Smooth maps between charts and their Riemannian-map apparatus.

All frames are computed pointwise from the Jacobian: the differential is
whitened by Cholesky factors of both metrics and split by an SVD, so the
horizontal frame and the range frame come out matched pairwise.
"""

import math
import warnings

import attr
import numpy as np
from attr.validators import instance_of

from clairautlib.expr import ScalarFieldExpr, eval_jet2
from clairautlib.geometry import (
    ChartManifold, connection, inner, norm, orthonormalize,
)
from clairautlib.validators import is_identifier, is_list_of


RANK_THRESHOLD = 1e-8
# singular values within this factor of the threshold are flagged
RANK_WARNING_FACTOR = 100.0
ORTHOGONALITY_TOLERANCE = 1e-9


class ImageOutsideDomainError(Exception):
    """Raised when a map sends a point outside the codomain chart."""


class NonOrthogonalVectorError(Exception):
    """Raised when a vector expected in (range)-perp has a range component."""


class EmptyDistributionError(Exception):
    """Raised when a quantity needs a distribution of dimension zero."""


class RankThresholdWarning(UserWarning):
    """Singular values close to the rank threshold."""


@attr.s(frozen=True)
class SmoothMapSpec(object):
    """Map ``domain_manifold -> codomain_manifold`` given by components."""

    name = attr.ib(validator=is_identifier)
    domain_manifold = attr.ib(validator=instance_of(ChartManifold))
    codomain_manifold = attr.ib(validator=instance_of(ChartManifold))
    components = attr.ib(converter=tuple, validator=is_list_of(ScalarFieldExpr))

    def __attrs_post_init__(self):
        if len(self.components) != self.codomain_manifold.dim:
            raise ValueError(
                '{} should have {} components, one per coordinate of {}'
                .format(self.name, self.codomain_manifold.dim,
                        self.codomain_manifold.name))
        for expr in self.components:
            if expr.coords != self.domain_manifold.coords:
                raise ValueError(
                    "component '{}' is not over the coordinates of {}".format(
                        expr.text, self.domain_manifold.name))


@attr.s
class MapJet(object):
    point = attr.ib()
    image = attr.ib()
    jacobian = attr.ib()
    second = attr.ib()


def map_jet(smooth_map, p):
    """Value, Jacobian and second derivatives of ``smooth_map`` at ``p``."""
    p = smooth_map.domain_manifold.check_point(p)
    jets = [eval_jet2(c, p) for c in smooth_map.components]
    image = np.array([jet.value for jet in jets])
    if not smooth_map.codomain_manifold.domain.contains(image):
        raise ImageOutsideDomainError(
            '{} sends {} to {}, outside the domain of {}'.format(
                smooth_map.name, list(p), list(image),
                smooth_map.codomain_manifold.name))
    return MapJet(
        point=p,
        image=image,
        jacobian=np.array([jet.grad for jet in jets]),
        second=np.array([jet.hess for jet in jets]),
    )


@attr.s
class FrameDecomposition(object):
    """Orthonormal frames of the four distributions at ``p`` and ``pi(p)``."""

    ker_frame = attr.ib()
    hker_frame = attr.ib()
    range_frame = attr.ib()
    rperp_frame = attr.ib()
    rank = attr.ib()
    singular_values = attr.ib()
    domain_dim = attr.ib()
    codomain_dim = attr.ib()

    @property
    def proper(self):
        """True when 0 < rank < min(dim M, dim B)."""
        return 0 < self.rank < min(self.domain_dim, self.codomain_dim)

    def to_json_data(self):
        return {
            'rank': self.rank,
            'singularValues': [float(s) for s in self.singular_values],
            'ker': [list(v) for v in self.ker_frame],
            'hker': [list(v) for v in self.hker_frame],
            'range': [list(v) for v in self.range_frame],
            'rangePerp': [list(v) for v in self.rperp_frame],
            'proper': self.proper,
        }


def projector(frame, metric):
    """Matrix of the metric-orthogonal projection onto span(frame).

    ``frame`` must be orthonormal in ``metric``.
    """
    size = len(metric)
    if not frame:
        return np.zeros((size, size))
    basis = np.array(frame).T
    return basis @ basis.T @ metric


def _decompose(jet, g1, g2):
    m, b = len(g1), len(g2)
    lower1 = np.linalg.cholesky(g1)
    lower2 = np.linalg.cholesky(g2)
    # whitened coordinates: y = L^T x, so g(x, x) = |y|^2
    whitened = lower2.T @ jet.jacobian @ np.linalg.inv(lower1.T)
    left, sigma, right_t = np.linalg.svd(whitened, full_matrices=True)
    largest = sigma[0] if len(sigma) else 0.0
    rank = int(np.sum(sigma > RANK_THRESHOLD * largest)) if largest > 0 else 0
    if largest > 0:
        close = [s for s in sigma
                 if RANK_THRESHOLD * largest / RANK_WARNING_FACTOR
                 < s <= RANK_THRESHOLD * largest * RANK_WARNING_FACTOR]
        if close:
            warnings.warn(
                'singular values {} are close to the rank threshold at {}'
                .format(close, list(jet.point)),
                RankThresholdWarning, stacklevel=3)

    unwhiten1 = np.linalg.inv(lower1.T)
    unwhiten2 = np.linalg.inv(lower2.T)
    right = right_t.T
    hker = [unwhiten1 @ right[:, i] for i in range(rank)]
    ker = [unwhiten1 @ right[:, i] for i in range(rank, m)]
    ranges = [unwhiten2 @ left[:, i] for i in range(rank)]
    rperp = [unwhiten2 @ left[:, i] for i in range(rank, b)]
    # align the sign of each range vector with the pushforward of its partner
    ranges = [r if inner(g2, r, jet.jacobian @ h) >= 0 else -r
              for r, h in zip(ranges, hker)]
    return FrameDecomposition(
        ker_frame=orthonormalize(ker, g1),
        hker_frame=orthonormalize(hker, g1),
        range_frame=orthonormalize(ranges, g2),
        rperp_frame=orthonormalize(rperp, g2),
        rank=rank,
        singular_values=sigma,
        domain_dim=m,
        codomain_dim=b,
    )


@attr.s
class LocalMapData(object):
    """Everything about a map needed at one point, computed once."""

    jet = attr.ib()
    g1 = attr.ib()
    g2 = attr.ib()
    gamma1 = attr.ib()
    gamma2 = attr.ib()
    decomposition = attr.ib()
    sff = attr.ib()

    @property
    def range_projector(self):
        return projector(self.decomposition.range_frame, self.g2)

    @property
    def rperp_projector(self):
        return projector(self.decomposition.rperp_frame, self.g2)

    def push(self, W):
        return self.jet.jacobian @ W

    def second_fundamental_form(self, W, Z):
        return np.einsum('gij,i,j->g', self.sff, W, Z)


def local_data(smooth_map, p):
    jet = map_jet(smooth_map, p)
    g1, gamma1 = connection(smooth_map.domain_manifold, jet.point)
    g2, gamma2 = connection(smooth_map.codomain_manifold, jet.image)
    J = jet.jacobian
    sff = (jet.second
           - np.einsum('kij,gk->gij', gamma1, J)
           + np.einsum('gab,ai,bj->gij', gamma2, J, J))
    return LocalMapData(
        jet=jet, g1=g1, g2=g2, gamma1=gamma1, gamma2=gamma2,
        decomposition=_decompose(jet, g1, g2),
        sff=0.5 * (sff + sff.transpose(0, 2, 1)),
    )


def decompose(smooth_map, p):
    """Orthonormal frames of ker, (ker)-perp, range and (range)-perp."""
    jet = map_jet(smooth_map, p)
    g1 = connection(smooth_map.domain_manifold, jet.point)[0]
    g2 = connection(smooth_map.codomain_manifold, jet.image)[0]
    return _decompose(jet, g1, g2)


def isometry_residual(smooth_map, p):
    """Max of |g2(pi_* W, pi_* Z) - g1(W, Z)| over horizontal frame pairs."""
    local = local_data(smooth_map, p)
    hker = local.decomposition.hker_frame
    residual = 0.0
    for W in hker:
        for Z in hker:
            residual = max(residual, abs(
                inner(local.g2, local.push(W), local.push(Z))
                - inner(local.g1, W, Z)))
    return residual


def second_fundamental_form(smooth_map, p, W, Z):
    """``(nabla pi_*)(W, Z)`` from the coordinate formula."""
    local = local_data(smooth_map, p)
    return local.second_fundamental_form(
        np.asarray(W, dtype=float), np.asarray(Z, dtype=float))


def lemma21_residual(smooth_map, p):
    """Max of |g2((nabla pi_*)(W, Y), pi_* Z)| over horizontal triples."""
    local = local_data(smooth_map, p)
    hker = local.decomposition.hker_frame
    residual = 0.0
    for W in hker:
        for Y in hker:
            value = local.second_fundamental_form(W, Y)
            for Z in hker:
                residual = max(residual,
                               abs(inner(local.g2, value, local.push(Z))))
    return residual


def _require_perp(local, V):
    V = np.asarray(V, dtype=float)
    along = local.range_projector @ V
    if norm(local.g2, along) > ORTHOGONALITY_TOLERANCE * (1.0 + norm(local.g2, V)):
        raise NonOrthogonalVectorError(
            'vector {} has a component of norm {:.3g} in range'.format(
                list(V), norm(local.g2, along)))
    return V


def shape_operator_matrix(local, V):
    hker = local.decomposition.hker_frame
    return np.array([[inner(local.g2, V, local.second_fundamental_form(W, Z))
                      for Z in hker] for W in hker])


def shape_operator(smooth_map, p, V):
    """Matrix of A_V on range in the range frame basis.

    Uses ``g2(A_V pi_* W, pi_* Z) = g2(V, (nabla pi_*)(W, Z))`` on the
    horizontal frame, whose pushforward is the range frame.
    """
    local = local_data(smooth_map, p)
    return shape_operator_matrix(local, _require_perp(local, V))


def apply_shape_operator(local, V, X):
    """``A_V X`` for X in range, as a codomain vector."""
    frame = local.decomposition.range_frame
    if not frame:
        return np.zeros(len(local.g2))
    matrix = shape_operator_matrix(local, V)
    coefficients = np.array([inner(local.g2, X, R) for R in frame])
    return np.array(frame).T @ (matrix @ coefficients)


def umbilical_fit_local(local):
    hker = local.decomposition.hker_frame
    if not hker:
        raise EmptyDistributionError('rank 0 map has no umbilical vector')
    perp = local.rperp_projector
    values = [[local.second_fundamental_form(W, Z) for Z in hker] for W in hker]
    H2 = sum(perp @ values[i][i] for i in range(len(hker))) / len(hker)
    misfits = []
    for i in range(len(hker)):
        for j in range(len(hker)):
            expected = H2 if i == j else 0.0
            misfits.append(norm(local.g2, values[i][j] - expected))
    return H2, math.sqrt(float(np.mean(np.square(misfits))))


def umbilical_fit(smooth_map, p):
    """Least-squares H2 with ``(nabla pi_*)(W, Z) = g1(W, Z) H2`` and its RMS misfit."""
    return umbilical_fit_local(local_data(smooth_map, p))


def _mean_curvature_local(local, which):
    decomposition = local.decomposition
    if which == 'vertical':
        frame, target = decomposition.ker_frame, decomposition.hker_frame
    elif which == 'horizontal':
        frame, target = decomposition.hker_frame, decomposition.ker_frame
    else:
        raise ValueError("which should be 'vertical' or 'horizontal'")
    if not frame:
        raise EmptyDistributionError(
            'the {} distribution is empty at {}'.format(
                which, list(local.jet.point)))
    total = np.zeros(len(local.g1))
    for e in frame:
        # frame vectors extended with constant coefficients
        total += np.einsum('kij,i,j->k', local.gamma1, e, e)
    return projector(target, local.g1) @ total / len(frame)


def mean_curvature(smooth_map, p, which):
    """Mean curvature vector of the vertical or horizontal distribution."""
    return _mean_curvature_local(local_data(smooth_map, p), which)


@attr.s
class HarmonicityPoint(object):
    point = attr.ib()
    tension = attr.ib()
    tension_norm = attr.ib()
    vertical_mean_curvature_norm = attr.ib()
    trace_identity_residual = attr.ib()
    umbilical_identity_residual = attr.ib()

    def to_json_data(self):
        return {
            'point': list(self.point),
            'tension': list(self.tension),
            'tensionNorm': self.tension_norm,
            'pushedVerticalMeanCurvatureNorm': self.vertical_mean_curvature_norm,
            'traceIdentityResidual': self.trace_identity_residual,
            'umbilicalIdentityResidual': self.umbilical_identity_residual,
        }


@attr.s
class HarmonicityReport(object):
    points = attr.ib()
    tolerance = attr.ib()

    @property
    def harmonic(self):
        return all(p.tension_norm < self.tolerance for p in self.points)

    def max(self, name):
        return max((getattr(p, name) for p in self.points), default=0.0)

    def to_json_data(self):
        return {
            'harmonic': self.harmonic,
            'tolerance': self.tolerance,
            'points': self.points,
        }


def harmonicity_report(smooth_map, points, tol=1e-8):
    """Tension field and the trace identities at each point.

    The reduced identity is ``trace(nabla pi_*) = -q pi_*(mean curvature of
    ker)``; the umbilical identity adds ``(m - q) H2`` on the right.
    """
    entries = []
    for p in points:
        local = local_data(smooth_map, p)
        decomposition = local.decomposition
        full_frame = decomposition.ker_frame + decomposition.hker_frame
        tension = sum((local.second_fundamental_form(e, e) for e in full_frame),
                      np.zeros(len(local.g2)))
        q = len(decomposition.ker_frame)
        if q:
            pushed = local.push(_mean_curvature_local(local, 'vertical'))
        else:
            pushed = np.zeros(len(local.g2))
        reduced = tension + q * pushed
        if decomposition.hker_frame:
            H2 = umbilical_fit_local(local)[0]
            umbilical = reduced - len(decomposition.hker_frame) * H2
        else:
            umbilical = reduced
        entries.append(HarmonicityPoint(
            point=local.jet.point,
            tension=tension,
            tension_norm=norm(local.g2, tension),
            vertical_mean_curvature_norm=norm(local.g2, pushed),
            trace_identity_residual=norm(local.g2, reduced),
            umbilical_identity_residual=norm(local.g2, umbilical),
        ))
    return HarmonicityReport(points=entries, tolerance=tol)
