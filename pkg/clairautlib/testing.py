"""Oracles and fixture builders for the test suite.

Nothing here feeds a production computation: finite differences are only
used to cross-check the exact derivatives.
"""

import math

import numpy as np
from hypothesis import strategies as st

from clairautlib.contact import ContactStructure, DeclaredType
from clairautlib.expr import constant_expr, evaluate, parse_expr
from clairautlib.geometry import ChartManifold, Domain, Interval, VectorFieldSpec
from clairautlib.rmap import SmoothMapSpec


FD_STEP = 1e-3


"""
Finite differences
"""


def fd_gradient(f, x, h=FD_STEP):
    """Fourth-order central differences of a scalar function."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros(len(x))
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = h
        grad[i] = (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)
    return grad


def _second_difference(f, x, d, h):
    return (-f(x + 2 * h * d) + 16 * f(x + h * d) - 30 * f(x)
            + 16 * f(x - h * d) - f(x - 2 * h * d)) / (12 * h * h)


def fd_hessian(f, x, h=FD_STEP):
    """Hessian by polarization of second directional differences."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    identity = np.eye(n)
    hess = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            if i == j:
                value = _second_difference(f, x, identity[i], h)
            else:
                value = 0.25 * (
                    _second_difference(f, x, identity[i] + identity[j], h)
                    - _second_difference(f, x, identity[i] - identity[j], h))
            hess[i, j] = hess[j, i] = value
    return hess


def expression_function(expr):
    return lambda x: evaluate(expr, x)


def fd_christoffel(manifold, point, h=FD_STEP):
    """Christoffel symbols from finite differences of the metric."""
    n = manifold.dim
    dg = np.zeros((n, n, n))
    g = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            expr = manifold.metric[i][j]
            g[i, j] = evaluate(expr, point)
            dg[:, i, j] = fd_gradient(expression_function(expr), point, h)
    g_inv = np.linalg.inv(g)
    gamma = np.zeros((n, n, n))
    for k in range(n):
        for i in range(n):
            for j in range(n):
                gamma[k, i, j] = 0.5 * sum(
                    g_inv[k, l] * (dg[i, l, j] + dg[j, l, i] - dg[l, i, j])
                    for l in range(n))
    return gamma


def fd_second_fundamental_form(smooth_map, p, W, Z, h=FD_STEP):
    """``(nabla pi_*)(W, Z)`` from the coordinate formula, all by differences."""
    p = np.asarray(p, dtype=float)
    image = np.array([evaluate(c, p) for c in smooth_map.components])
    functions = [expression_function(c) for c in smooth_map.components]
    J = np.array([fd_gradient(f, p, h) for f in functions])
    second = np.array([W @ fd_hessian(f, p, h) @ Z for f in functions])
    gamma1 = fd_christoffel(smooth_map.domain_manifold, p, h)
    gamma2 = fd_christoffel(smooth_map.codomain_manifold, image, h)
    return (second
            - J @ np.einsum('kij,i,j->k', gamma1, W, Z)
            + np.einsum('gab,a,b->g', gamma2, J @ W, J @ Z))


"""
Random expressions
"""


FUNCTION_NAMES = ('sin', 'cos', 'exp')


def expression_texts(coords, max_leaves=6):
    """Strategy for expression sources with bounded values near the origin.

    Functions only wrap linear arguments ``+-x`` or ``+-x + 0.5``.
    """
    leaves = st.one_of(
        st.sampled_from(list(coords)),
        st.integers(min_value=1, max_value=3).map(str),
        st.builds('{}({}{}{})'.format,
                  st.sampled_from(FUNCTION_NAMES), st.sampled_from(('', '-')),
                  st.sampled_from(list(coords)),
                  st.sampled_from(('', ' + 0.5'))),
    )
    return st.recursive(
        leaves,
        lambda children: st.builds('({} {} {})'.format,
                                   children, st.sampled_from('+-*'), children),
        max_leaves=max_leaves)


def random_expression(rng, coords, depth=2):
    """Same family as :func:`expression_texts`, drawn from a numpy generator."""
    if depth == 0 or rng.random() < 0.3:
        choice = rng.integers(3)
        if choice == 0:
            return coords[rng.integers(len(coords))]
        if choice == 1:
            return str(rng.integers(1, 4))
        return '{}({}{}{})'.format(
            FUNCTION_NAMES[rng.integers(len(FUNCTION_NAMES))],
            '-' if rng.random() < 0.5 else '',
            coords[rng.integers(len(coords))],
            ' + 0.5' if rng.random() < 0.5 else '')
    return '({} {} {})'.format(
        random_expression(rng, coords, depth - 1), '+-*'[rng.integers(3)],
        random_expression(rng, coords, depth - 1))


"""
Fixture builders
"""


def _matrix(entries, coords):
    return [[parse_expr(e, coords) if isinstance(e, str)
             else constant_expr(e, coords) for e in row] for row in entries]


def euclidean(name, coords, domain=None):
    n = len(coords)
    return ChartManifold(
        name=name, coords=coords,
        metric=_matrix(np.eye(n).tolist(), coords),
        domain=domain or Domain.unbounded(n))


def sphere():
    """Unit sphere in polar angle ``theta`` and azimuth ``phi``."""
    coords = ('theta', 'phi')
    return ChartManifold(
        name='S2', coords=coords,
        metric=_matrix([['1', '0'], ['0', 'sin(theta)^2']], coords),
        domain=Domain(bounds=[Interval(0.0, math.pi), Interval()]))


def polar():
    coords = ('r', 't')
    return ChartManifold(
        name='plane', coords=coords,
        metric=_matrix([['1', '0'], ['0', 'r^2']], coords),
        domain=Domain(bounds=[Interval(0.0), Interval()]))


def _embed(theta, phi):
    return np.array([math.sin(theta) * math.cos(phi),
                     math.sin(theta) * math.sin(phi),
                     math.cos(theta)])


def great_circle(p0, v0, s):
    """Closed-form sphere geodesic through ``p0`` with velocity ``v0``, at ``s``."""
    theta, phi = p0
    X = _embed(theta, phi)
    X_theta = np.array([math.cos(theta) * math.cos(phi),
                        math.cos(theta) * math.sin(phi),
                        -math.sin(theta)])
    X_phi = np.array([-math.sin(theta) * math.sin(phi),
                      math.sin(theta) * math.cos(phi), 0.0])
    V = v0[0] * X_theta + v0[1] * X_phi
    speed = np.linalg.norm(V)
    Y = math.cos(speed * s) * X + math.sin(speed * s) * V / speed
    new_phi = math.atan2(Y[1], Y[0])
    # unwrap against the start azimuth
    new_phi += 2 * math.pi * round((phi - new_phi) / (2 * math.pi))
    return np.array([math.acos(max(-1.0, min(1.0, Y[2]))), new_phi])


def flat_cosymplectic(n=1):
    """Flat R^(2n+1) with coordinates ``x1.. y1.. t`` and its cosymplectic structure."""
    coords = (tuple('x{}'.format(i + 1) for i in range(n))
              + tuple('y{}'.format(i + 1) for i in range(n)) + ('t',))
    size = 2 * n + 1
    manifold = euclidean('R{}'.format(size), coords)
    psi = np.zeros((size, size))
    for i in range(n):
        psi[n + i, i] = 1.0
        psi[i, n + i] = -1.0
    reeb = np.zeros(size)
    reeb[-1] = 1.0
    zero = constant_expr(0.0, coords)
    return ContactStructure(
        name='cosymplectic',
        manifold=manifold,
        psi=_matrix(psi.tolist(), coords),
        xi=VectorFieldSpec(components=[constant_expr(x, coords) for x in reeb]),
        eta=[constant_expr(x, coords) for x in reeb],
        declared_type=DeclaredType(alpha=zero, beta=zero),
    )


def sasakian_example():
    """Sasakian structure of type (1, 0) on R^3 minus w = 0."""
    coords = ('u', 'v', 'w')
    manifold = ChartManifold(
        name='B', coords=coords,
        metric=_matrix([['(1+v^2)/4', '0', '-v/4'],
                        ['0', '1/4', '0'],
                        ['-v/4', '0', '1/4']], coords))
    return ContactStructure(
        name='sasakian',
        manifold=manifold,
        psi=_matrix([['0', '1', '0'], ['-1', '0', '0'], ['0', 'v', '0']],
                    coords),
        xi=VectorFieldSpec.parse(['0', '0', '2'], coords),
        eta=[parse_expr(t, coords) for t in ('-v/2', '0', '1/2')],
        declared_type=DeclaredType(alpha=parse_expr('1', coords),
                                   beta=parse_expr('0', coords)),
    )


def linear_map(name, domain, codomain, matrix):
    """Map ``x -> A x`` between charts."""
    components = []
    for row in matrix:
        terms = ['({!r})*{}'.format(float(a), c)
                 for a, c in zip(row, domain.coords) if a != 0]
        components.append(parse_expr(' + '.join(terms) or '0', domain.coords))
    return SmoothMapSpec(name=name, domain_manifold=domain,
                         codomain_manifold=codomain, components=components)


def random_riemannian_map(rng, m=3, b=5, rank=None):
    """Riemannian map between flat charts built from helices in orthogonal planes.

    With orthonormal ``n_i`` in R^m and orthonormal ``a_i, b_i`` in R^b,
    ``pi(X) = c + sum_i rho_i (cos(n_i.X / rho_i) a_i + sin(n_i.X / rho_i) b_i)``
    is isometric on span(n_i) and kills its complement.
    """
    if rank is None:
        rank = int(rng.integers(1, min(m, b // 2) + 1))
    normals = np.linalg.qr(rng.standard_normal((m, m)))[0][:, :rank].T
    planes = np.linalg.qr(rng.standard_normal((b, b)))[0][:, :2 * rank].T
    radii = rng.uniform(0.5, 2.0, rank)
    offset = rng.uniform(-1.0, 1.0, b)
    domain = euclidean('M', tuple('p{}'.format(i + 1) for i in range(m)))
    codomain = euclidean('B', tuple('q{}'.format(i + 1) for i in range(b)))

    def number(x):
        return '({!r})'.format(float(x))

    components = []
    for k in range(b):
        terms = [number(offset[k])]
        for i in range(rank):
            phase = '({})/{}'.format(
                ' + '.join('{}*{}'.format(number(nv), c)
                           for nv, c in zip(normals[i], domain.coords)),
                number(radii[i]))
            terms.append('{}*({}*cos({}) + {}*sin({}))'.format(
                number(radii[i]), number(planes[2 * i][k]), phase,
                number(planes[2 * i + 1][k]), phase))
        components.append(parse_expr(' + '.join(terms), domain.coords))
    return SmoothMapSpec(name='helix', domain_manifold=domain,
                         codomain_manifold=codomain, components=components)
