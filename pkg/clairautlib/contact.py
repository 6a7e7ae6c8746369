"""Almost-contact metric structures and their trans-Sasakian type."""

import math

import attr
import numpy as np
from attr.validators import instance_of, optional

from clairautlib.expr import ScalarFieldExpr, eval_jet1, evaluate
from clairautlib.geometry import (
    ChartManifold, VectorFieldSpec, connection, covariant_derivative_tensor11,
    evaluate_matrix, inner, norm,
)
from clairautlib.validators import is_identifier, is_list_of, is_square_matrix


DEFAULT_TOLERANCE = 1e-8
RANDOM_VECTOR_COUNT = 20
DEGENERATE_FIT_CONDITION = 1e10
CLASSIFICATION_TOLERANCE = 1e-8


class DimensionParityError(Exception):
    """Raised when a contact structure lives on an even-dimensional chart."""


class DegenerateFitError(Exception):
    """Raised when (alpha, beta) cannot be separated at a point."""


@attr.s(frozen=True)
class DeclaredType(object):
    """Closed-form (alpha, beta) a structure is claimed to have."""

    alpha = attr.ib(validator=instance_of(ScalarFieldExpr))
    beta = attr.ib(validator=instance_of(ScalarFieldExpr))

    def at(self, point):
        return evaluate(self.alpha, point), evaluate(self.beta, point)

    def to_json_data(self):
        return {'alpha': self.alpha.text, 'beta': self.beta.text}


@attr.s(frozen=True)
class ContactStructure(object):
    """Tensors (psi, xi, eta) of an almost-contact structure on ``manifold``.

    The metric is the one of ``manifold``.
    """

    name = attr.ib(validator=is_identifier)
    manifold = attr.ib(validator=instance_of(ChartManifold))
    psi = attr.ib(converter=lambda rows: tuple(tuple(r) for r in rows),
                  validator=is_square_matrix)
    xi = attr.ib(validator=instance_of(VectorFieldSpec))
    eta = attr.ib(converter=tuple, validator=is_list_of(ScalarFieldExpr))
    declared_type = attr.ib(default=None,
                            validator=optional(instance_of(DeclaredType)))

    def __attrs_post_init__(self):
        n = self.manifold.dim
        if len(self.psi) != n or self.xi.dim != n or len(self.eta) != n:
            raise ValueError(
                'psi, xi and eta of {} should all have dimension {}'.format(
                    self.name, n))
        expressions = [e for row in self.psi for e in row]
        expressions += list(self.xi.components) + list(self.eta)
        for expr in expressions:
            if expr.coords != self.manifold.coords:
                raise ValueError(
                    "'{}' is not over the coordinates of {}".format(
                        expr.text, self.manifold.name))

    @property
    def dim(self):
        return self.manifold.dim

    def at(self, point):
        point = self.manifold.check_point(point)
        return StructureAtPoint(
            point=point,
            metric=evaluate_matrix(self.manifold.metric, point),
            psi=evaluate_matrix(self.psi, point),
            xi=self.xi.at(point),
            eta=np.array([evaluate(e, point) for e in self.eta]),
        )


@attr.s
class StructureAtPoint(object):
    point = attr.ib()
    metric = attr.ib()
    psi = attr.ib()
    xi = attr.ib()
    eta = attr.ib()


def require_odd_dimension(structure):
    if structure.dim % 2 == 0:
        raise DimensionParityError(
            '{} lives on a chart of even dimension {}'.format(
                structure.name, structure.dim))


def _rng(rng):
    return rng if rng is not None else np.random.default_rng(0)


@attr.s
class AxiomReport(object):
    """Largest residual of every almost-contact axiom over the points."""

    residuals = attr.ib()
    tolerance = attr.ib()
    points = attr.ib()

    @property
    def passed(self):
        return all(value < self.tolerance for value in self.residuals.values())

    def to_json_data(self):
        return {
            'residuals': self.residuals,
            'tolerance': self.tolerance,
            'points': self.points,
            'passed': self.passed,
        }


def check_almost_contact(structure, points, tol=DEFAULT_TOLERANCE, rng=None,
                         count=RANDOM_VECTOR_COUNT):
    """Residuals of the almost-contact metric axioms at ``points``.

    Compatibility and ``eta(W) = g(W, xi)`` are tested on ``count`` random
    vector pairs per point.
    """
    require_odd_dimension(structure)
    rng = _rng(rng)
    n = structure.dim
    residuals = dict.fromkeys(
        ('psi_squared', 'psi_xi', 'eta_psi', 'eta_xi', 'compatibility',
         'eta_metric'), 0.0)

    def record(key, value):
        residuals[key] = max(residuals[key], float(value))

    for point in points:
        at = structure.at(point)
        g, psi, xi, eta = at.metric, at.psi, at.xi, at.eta
        record('psi_squared', np.linalg.norm(
            psi @ psi + np.eye(n) - np.outer(xi, eta)))
        record('psi_xi', norm(g, psi @ xi))
        record('eta_psi', np.linalg.norm(eta @ psi))
        record('eta_xi', abs(eta @ xi - 1.0))
        for _ in range(count):
            W, Z = rng.standard_normal(n), rng.standard_normal(n)
            record('compatibility', abs(
                inner(g, psi @ W, psi @ Z) - inner(g, W, Z)
                + (eta @ W) * (eta @ Z)))
            record('eta_metric', abs(eta @ W - inner(g, W, xi)))
    return AxiomReport(residuals=residuals, tolerance=tol, points=len(points))


def classify_type(alpha, beta, tol=CLASSIFICATION_TOLERANCE):
    """Name of the class a structure of type (alpha, beta) belongs to."""
    alpha_zero, beta_zero = abs(alpha) < tol, abs(beta) < tol
    if alpha_zero and beta_zero:
        return 'cosymplectic'
    if beta_zero:
        return 'Sasakian' if abs(alpha - 1.0) < tol else 'alpha-Sasakian'
    if alpha_zero:
        return 'Kenmotsu' if abs(beta - 1.0) < tol else 'beta-Kenmotsu'
    return 'trans-Sasakian'


@attr.s
class TypeEstimate(object):
    alpha = attr.ib()
    beta = attr.ib()
    residual = attr.ib()
    point = attr.ib()

    @property
    def kind(self):
        return classify_type(self.alpha, self.beta)

    def to_json_data(self):
        return {
            'alpha': self.alpha,
            'beta': self.beta,
            'residual': self.residual,
            'point': list(self.point),
            'kind': self.kind,
        }


def _reeb_derivatives(structure, point, directions):
    """``nabla_W xi`` for every direction W at ``point``."""
    _, gamma = connection(structure.manifold, point)
    xi, jac = structure.xi.jacobian(point)
    return [jac @ W + np.einsum('kij,i,j->k', gamma, W, xi)
            for W in directions]


def estimate_type(structure, point, directions=None):
    """Least-squares (alpha, beta) from ``nabla_W xi = -alpha psi W + beta (W - eta(W) xi)``.

    :param directions: test vectors W; the coordinate directions by default
    """
    require_odd_dimension(structure)
    at = structure.at(point)
    n = structure.dim
    if directions is None:
        directions = list(np.eye(n))
    directions = [np.asarray(W, dtype=float) for W in directions]
    # whiten so that the fit minimizes g-norms
    whitening = np.linalg.cholesky(at.metric).T
    rows, observed = [], []
    for W, reeb in zip(directions,
                       _reeb_derivatives(structure, at.point, directions)):
        rows.append(np.column_stack([
            whitening @ (-at.psi @ W),
            whitening @ (W - (at.eta @ W) * at.xi),
        ]))
        observed.append(whitening @ reeb)
    design = np.vstack(rows)
    target = np.concatenate(observed)
    condition = np.linalg.cond(design)
    if not np.isfinite(condition) or condition > DEGENERATE_FIT_CONDITION:
        raise DegenerateFitError(
            'cannot separate alpha and beta at {} (condition {:.3g})'.format(
                list(at.point), condition))
    (alpha, beta), *_ = np.linalg.lstsq(design, target, rcond=None)
    misfit = (target - design @ np.array([alpha, beta])).reshape(
        len(directions), n)
    residual = math.sqrt(float(np.mean(np.sum(misfit * misfit, axis=1))))
    return TypeEstimate(alpha=float(alpha), beta=float(beta),
                        residual=residual, point=at.point)


@attr.s
class TransSasakianResiduals(object):
    """RMS residuals of the defining equations for a given (alpha, beta).

    ``eta`` is the scalar form ``(nabla_W eta) Z = -alpha g(psi W, Z) +
    beta g(psi W, psi Z)``. ``eta_printed`` keeps the alpha term as the
    vector ``-alpha g(psi W, Z) xi`` and contracts it with eta. The two
    agree exactly where ``eta(xi) = 1``.
    """

    psi = attr.ib()
    eta = attr.ib()
    eta_printed = attr.ib()
    xi = attr.ib()
    alpha = attr.ib()
    beta = attr.ib()

    def certified(self, tol):
        return max(self.psi, self.eta, self.xi) < tol

    def to_json_data(self):
        return attr.asdict(self)


def _rms(values):
    return math.sqrt(float(np.mean(np.square(values)))) if values else 0.0


def trans_sasakian_residual(structure, point, alpha, beta, rng=None,
                            count=RANDOM_VECTOR_COUNT):
    """Residuals of the trans-Sasakian equations over random W, Z."""
    require_odd_dimension(structure)
    rng = _rng(rng)
    at = structure.at(point)
    g, psi, xi, eta = at.metric, at.psi, at.xi, at.eta
    n = structure.dim
    _, gamma = connection(structure.manifold, at.point)
    eta_jets = [eval_jet1(e, at.point) for e in structure.eta]
    eta_jac = np.array([grad for _, grad in eta_jets])

    psi_res, eta_res, printed_res, xi_res = [], [], [], []
    for _ in range(count):
        W, Z = rng.standard_normal(n), rng.standard_normal(n)
        nabla_psi = covariant_derivative_tensor11(
            structure.manifold, structure.psi, W, at.point)
        lhs = nabla_psi @ Z
        rhs = (alpha * (inner(g, W, Z) * xi - (eta @ Z) * W)
               + beta * (inner(g, psi @ W, Z) * xi - (eta @ Z) * (psi @ W)))
        psi_res.append(norm(g, lhs - rhs))

        nabla_eta = eta_jac @ W - np.einsum('kij,i,k->j', gamma, W, eta)
        scalar = (nabla_eta @ Z
                  + alpha * inner(g, psi @ W, Z)
                  - beta * inner(g, psi @ W, psi @ Z))
        eta_res.append(abs(scalar))
        alpha_vector = -alpha * inner(g, psi @ W, Z) * xi
        printed = (nabla_eta @ Z - eta @ alpha_vector
                   - beta * inner(g, psi @ W, psi @ Z))
        printed_res.append(abs(printed))

        reeb = _reeb_derivatives(structure, at.point, [W])[0]
        expected = -alpha * (psi @ W) + beta * (W - (eta @ W) * xi)
        xi_res.append(norm(g, reeb - expected))

    return TransSasakianResiduals(
        psi=_rms(psi_res), eta=_rms(eta_res), eta_printed=_rms(printed_res),
        xi=_rms(xi_res), alpha=float(alpha), beta=float(beta))
