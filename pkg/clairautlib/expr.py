"""Scalar-field expressions over named chart coordinates.

Expressions are parsed into immutable trees and evaluated either as plain
floats or over nested forward-mode dual numbers, which gives exact first and
second derivatives without any finite-difference step.
"""

import math
import re

import attr
import numpy as np
from attr.validators import instance_of

from clairautlib.validators import is_in


FUNCTIONS = ('sin', 'cos', 'tan', 'exp', 'log', 'sqrt')
CONSTANTS = {'pi': math.pi, 'e': math.e}
RESERVED_NAMES = frozenset(FUNCTIONS) | frozenset(CONSTANTS)

# Binary operators in groups of increasing binding power. Unary minus sits
# between '*' and '^'.
OPERATORS = [
    [('+', 'left'), ('-', 'left')],
    [('*', 'left'), ('/', 'left')],
    [('^', 'right')],
]
OPERATOR_PREC = {
    name: idx for (idx, group) in enumerate(OPERATORS) for name, _ in group
}
OPERATOR_ASSOC = {name: assoc for group in OPERATORS for name, assoc in group}
UNARY_MINUS_PREC = OPERATOR_PREC['^']

_TOKEN_RE = re.compile(r"""
    (?P<space>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


class ExpressionSyntaxError(Exception):
    """Raised when an expression does not follow the grammar."""

    def __init__(self, message, offset):
        super().__init__('{} at offset {}'.format(message, offset))
        self.offset = offset


class UnknownIdentifierError(Exception):
    """Raised when an expression names something that is not a coordinate."""

    def __init__(self, name, offset):
        super().__init__(
            "unknown identifier '{}' at offset {}".format(name, offset))
        self.name = name
        self.offset = offset


class ExpressionDomainError(Exception):
    """Raised when an expression is evaluated outside its domain."""

    def __init__(self, message, subexpression):
        super().__init__('{} in {}'.format(message, subexpression))
        self.subexpression = subexpression


"""
Dual numbers
"""


def _scale(factor, eps):
    """Multiply a value-level factor into a tangent part.

    Plain tangents are arrays with the direction axis last.
    """
    if isinstance(eps, Dual):
        return factor * eps
    return np.asarray(factor)[..., None] * eps


class Dual(object):
    """Dual number ``real + eps·ε`` with an array-valued tangent.

    Nesting a Dual inside the real and tangent parts of another gives second
    derivatives: the inner level differentiates along one set of directions,
    the outer level along another.
    """

    __slots__ = ('real', 'eps')

    def __init__(self, real, eps):
        self.real = real
        self.eps = eps

    def __repr__(self):
        return 'Dual({!r}, {!r})'.format(self.real, self.eps)

    def __neg__(self):
        return Dual(-self.real, -self.eps)

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.real + other.real, self.eps + other.eps)
        return Dual(self.real + other, self.eps)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.real * other.real,
                _scale(self.real, other.eps) + _scale(other.real, self.eps))
        return Dual(self.real * other, _scale(other, self.eps))

    __rmul__ = __mul__

    def reciprocal(self):
        inverse = 1.0 / self.real
        return Dual(inverse, _scale(-(inverse * inverse), self.eps))

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return self * other.reciprocal()
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other


def base_value(x):
    """Innermost real part of a (possibly nested) dual number."""
    while isinstance(x, Dual):
        x = x.real
    return float(x)


def _lift(x, f, fprime):
    if isinstance(x, Dual):
        return Dual(_lift(x.real, f, fprime), _scale(fprime(x.real), x.eps))
    return f(x)


def _sin(x):
    return _lift(x, np.sin, _cos)


def _cos(x):
    return _lift(x, np.cos, lambda t: -_sin(t))


def _tan(x):
    return _lift(x, np.tan, lambda t: 1.0 + _tan(t) * _tan(t))


def _exp(x):
    return _lift(x, np.exp, _exp)


def _log(x):
    return _lift(x, np.log, lambda t: 1.0 / t)


def _sqrt(x):
    return _lift(x, np.sqrt, lambda t: 0.5 / _sqrt(t))


_IMPLEMENTATIONS = {
    'sin': _sin,
    'cos': _cos,
    'tan': _tan,
    'exp': _exp,
    'log': _log,
    'sqrt': _sqrt,
}


"""
Expression trees
"""


@attr.s(frozen=True)
class Number(object):
    value = attr.ib(validator=instance_of(float))

    def evaluate(self, args):
        return self.value

    def variables(self):
        return frozenset()

    def to_text(self):
        if self.value < 0:
            return '(-{!r})'.format(-self.value)
        return repr(self.value)


@attr.s(frozen=True)
class Constant(object):
    name = attr.ib(validator=is_in(tuple(CONSTANTS)))

    def evaluate(self, args):
        return CONSTANTS[self.name]

    def variables(self):
        return frozenset()

    def to_text(self):
        return self.name


@attr.s(frozen=True)
class Variable(object):
    name = attr.ib(validator=instance_of(str))
    index = attr.ib(validator=instance_of(int))

    def evaluate(self, args):
        return args[self.index]

    def variables(self):
        return frozenset([self.name])

    def to_text(self):
        return self.name


@attr.s(frozen=True)
class Negate(object):
    operand = attr.ib()

    def evaluate(self, args):
        return -self.operand.evaluate(args)

    def variables(self):
        return self.operand.variables()

    def to_text(self):
        return '(-{})'.format(self.operand.to_text())


@attr.s(frozen=True)
class BinaryOp(object):
    op = attr.ib(validator=is_in(('+', '-', '*', '/')))
    left = attr.ib()
    right = attr.ib()

    def evaluate(self, args):
        lhs = self.left.evaluate(args)
        rhs = self.right.evaluate(args)
        if self.op == '+':
            return lhs + rhs
        if self.op == '-':
            return lhs - rhs
        if self.op == '*':
            return lhs * rhs
        if base_value(rhs) == 0.0:
            raise ExpressionDomainError('division by zero', self.to_text())
        return lhs / rhs

    def variables(self):
        return self.left.variables() | self.right.variables()

    def to_text(self):
        return '({} {} {})'.format(
            self.left.to_text(), self.op, self.right.to_text())


@attr.s(frozen=True)
class Power(object):
    """Integer power; other exponents go through ``exp`` and ``log``."""

    base = attr.ib()
    exponent = attr.ib(validator=instance_of(int))

    def evaluate(self, args):
        value = self.base.evaluate(args)
        if self.exponent < 0 and base_value(value) == 0.0:
            raise ExpressionDomainError('division by zero', self.to_text())
        result = 1.0
        for _ in range(abs(self.exponent)):
            result = result * value
        if self.exponent < 0:
            return 1.0 / result
        return result

    def variables(self):
        return self.base.variables()

    def to_text(self):
        return '({}^{})'.format(self.base.to_text(), self.exponent)


@attr.s(frozen=True)
class Call(object):
    func = attr.ib(validator=is_in(FUNCTIONS))
    argument = attr.ib()

    def evaluate(self, args):
        value = self.argument.evaluate(args)
        x = base_value(value)
        if self.func == 'log' and x <= 0.0:
            raise ExpressionDomainError(
                'log of non-positive value', self.to_text())
        if self.func == 'sqrt' and x < 0.0:
            raise ExpressionDomainError(
                'sqrt of negative value', self.to_text())
        return _IMPLEMENTATIONS[self.func](value)

    def variables(self):
        return self.argument.variables()

    def to_text(self):
        return '{}({})'.format(self.func, self.argument.to_text())


"""
Parsing
"""


@attr.s
class _Token(object):
    kind = attr.ib()
    text = attr.ib()
    offset = attr.ib()


def _byte_offset(text, index):
    return len(text[:index].encode('utf-8'))


def tokenize(text):
    tokens = []
    index = 0
    while index < len(text):
        match = _TOKEN_RE.match(text, index)
        if match is None:
            raise ExpressionSyntaxError(
                "unexpected character '{}'".format(text[index]),
                _byte_offset(text, index))
        if match.lastgroup != 'space':
            tokens.append(_Token(
                match.lastgroup, match.group(), _byte_offset(text, index)))
        index = match.end()
    return tokens


class _Parser(object):
    """Precedence climbing over a token list."""

    def __init__(self, text, coords):
        self.text = text
        self.coords = tuple(coords)
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self):
        if self.pos < len(self.tokens):
            return self.tokens[self.pos]
        return None

    def advance(self):
        token = self.peek()
        self.pos += 1
        return token

    def end_offset(self):
        return _byte_offset(self.text, len(self.text))

    def expect(self, text):
        token = self.advance()
        if token is None:
            raise ExpressionSyntaxError(
                "expected '{}'".format(text), self.end_offset())
        if token.text != text:
            raise ExpressionSyntaxError(
                "expected '{}', found '{}'".format(text, token.text),
                token.offset)

    def parse(self):
        if not self.tokens:
            raise ExpressionSyntaxError('empty expression', 0)
        root = self.parse_binary(0)
        token = self.peek()
        if token is not None:
            raise ExpressionSyntaxError(
                "unexpected '{}'".format(token.text), token.offset)
        return root

    def parse_binary(self, min_prec):
        lhs = self.parse_atom()
        while True:
            token = self.peek()
            if token is None or token.text not in OPERATOR_PREC:
                return lhs
            prec = OPERATOR_PREC[token.text]
            if prec < min_prec:
                return lhs
            self.advance()
            if OPERATOR_ASSOC[token.text] == 'left':
                next_prec = prec + 1
            else:
                next_prec = prec
            start = self.peek()
            rhs = self.parse_binary(next_prec)
            if token.text == '^':
                lhs = self.make_power(lhs, rhs, start or token)
            else:
                lhs = BinaryOp(token.text, lhs, rhs)

    def make_power(self, base, exponent, token):
        if base == Constant('e'):
            return Call('exp', exponent)
        if exponent.variables():
            raise ExpressionSyntaxError(
                'exponent must be a constant integer', token.offset)
        value = exponent.evaluate(())
        if not float(value).is_integer():
            raise ExpressionSyntaxError(
                'exponent must be a constant integer', token.offset)
        return Power(base, int(value))

    def parse_atom(self):
        token = self.advance()
        if token is None:
            raise ExpressionSyntaxError(
                'unexpected end of input', self.end_offset())
        if token.text == '-':
            return Negate(self.parse_binary(UNARY_MINUS_PREC))
        if token.text == '(':
            inner = self.parse_binary(0)
            self.expect(')')
            return inner
        if token.kind == 'number':
            return Number(float(token.text))
        if token.kind == 'name':
            return self.parse_name(token)
        raise ExpressionSyntaxError(
            "unexpected '{}'".format(token.text), token.offset)

    def parse_name(self, token):
        name = token.text
        if name in FUNCTIONS:
            self.expect('(')
            argument = self.parse_binary(0)
            self.expect(')')
            return Call(name, argument)
        if name in self.coords:
            return Variable(name, self.coords.index(name))
        if name in CONSTANTS:
            return Constant(name)
        raise UnknownIdentifierError(name, token.offset)


"""
Public API
"""


@attr.s(frozen=True)
class ScalarFieldExpr(object):
    """A parsed scalar field on a chart with coordinates ``coords``."""

    text = attr.ib(validator=instance_of(str))
    coords = attr.ib(converter=tuple)
    root = attr.ib(repr=False, eq=False)

    @property
    def dim(self):
        return len(self.coords)

    def is_constant(self):
        return not self.root.variables()

    def to_text(self):
        return self.root.to_text()

    def to_json_data(self):
        return self.text

    def __str__(self):
        return self.text


@attr.s(frozen=True)
class Jet2Value(object):
    value = attr.ib()
    grad = attr.ib()
    hess = attr.ib()


def parse_expr(text, coords):
    """Parse ``text`` into a :class:`ScalarFieldExpr` over ``coords``.

    :param str text: expression source, e.g. ``"1/(v*e^w)"``
    :param coords: coordinate names of the owning chart
    """
    root = _Parser(text, coords).parse()
    return ScalarFieldExpr(text=text, coords=coords, root=root)


def constant_expr(value, coords):
    """Expression for a constant value."""
    value = float(value)
    root = Number(value) if value >= 0 else Negate(Number(-value))
    return ScalarFieldExpr(text=repr(value), coords=coords, root=root)


def _check_point(expr, point):
    point = np.asarray(point, dtype=float)
    if point.shape != (expr.dim,):
        raise ValueError(
            'point should have {} coordinates, got shape {}'.format(
                expr.dim, point.shape))
    return point


def _check_finite(expr, *parts):
    for part in parts:
        if not np.all(np.isfinite(part)):
            raise ExpressionDomainError('non-finite value', expr.text)


def evaluate(expr, point):
    """Value of ``expr`` at ``point`` as a float."""
    point = _check_point(expr, point)
    with np.errstate(all='ignore'):
        value = float(expr.root.evaluate(tuple(point)))
    _check_finite(expr, value)
    return value


def eval_jet1(expr, point):
    """Value and exact gradient of ``expr`` at ``point``."""
    point = _check_point(expr, point)
    n = len(point)
    identity = np.eye(n)
    args = tuple(Dual(point[i], identity[i]) for i in range(n))
    with np.errstate(all='ignore'):
        result = expr.root.evaluate(args)
    if isinstance(result, Dual):
        value = float(result.real)
        grad = np.array(result.eps, dtype=float)
    else:
        value, grad = float(result), np.zeros(n)
    _check_finite(expr, value, grad)
    return value, grad


def eval_jet2(expr, point):
    """Value, gradient and Hessian of ``expr`` at ``point``.

    Every coordinate is seeded as a dual of duals; the outer tangent of the
    inner tangent carries the mixed second derivatives.
    """
    point = _check_point(expr, point)
    n = len(point)
    identity = np.eye(n)
    zeros = np.zeros((n, n))
    args = tuple(
        Dual(Dual(point[i], identity[i]), Dual(identity[i], zeros))
        for i in range(n))
    with np.errstate(all='ignore'):
        result = expr.root.evaluate(args)

    value, grad, hess = float(base_value(result)), np.zeros(n), np.zeros((n, n))
    if isinstance(result, Dual):
        inner, outer = result.real, result.eps
        if isinstance(inner, Dual):
            grad = np.array(inner.eps, dtype=float)
        if isinstance(outer, Dual):
            hess = np.array(outer.eps, dtype=float)
    hess = 0.5 * (hess + hess.T)
    _check_finite(expr, value, grad, hess)
    return Jet2Value(value=value, grad=grad, hess=hess)
