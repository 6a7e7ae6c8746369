import math
import re

import attr


IDENTIFIER_RE = re.compile(r'^[A-Za-z_][A-Za-z0-9_]*$')


@attr.attributes(repr=False, slots=True)
class _IsInValidator(object):
    choices = attr.attr()

    def __call__(self, inst, attr, value):
        if value not in self.choices:
            raise ValueError("{attr} should be one of {choice}".format(
                attr=attr.name, choice=self.choices))

    def __repr__(self):
        return (
            "<is value present in list of  {choice}>"
            .format(choice=self.choices)
        )


def is_in(choices):
    """
    A validator that raises a :exc:`ValueError` if the attribute value is not
    in a provided list.

    :param choices: List of valid choices
    """
    return _IsInValidator(choices)


def is_identifier(instance, attribute, value):
    """
    A validator that raises a :exc:`ValueError` if the attribute value is not
    a plain identifier (letters, digits and underscores, not starting with a
    digit).
    """
    if not isinstance(value, str) or not IDENTIFIER_RE.match(value):
        raise ValueError(
            "{attr} should be an identifier matching {pattern}, got {value!r}"
            .format(attr=attribute.name, pattern=IDENTIFIER_RE.pattern,
                    value=value))


def is_positive(instance, attribute, value):
    """
    A validator that raises a :exc:`ValueError` if the attribute value is not
    a finite number greater than zero.
    """
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError("{attr} should be a number".format(attr=attribute.name))
    if not math.isfinite(value) or value <= 0:
        raise ValueError(
            "{attr} should be positive, got {value}".format(
                attr=attribute.name, value=value))


@attr.attributes(repr=False, slots=True)
class _ListOfValidator(object):
    etype = attr.attr()

    def __call__(self, inst, attr, value):
        if False in set(map(lambda el: isinstance(el, self.etype), value)):
            raise ValueError("{attr} should be list of {etype}".format(
                attr=attr.name, etype=self.etype))

    def __repr__(self):
        return (
            "<is value is the list of {etype}>"
            .format(etype=self.etype)
        )


def is_list_of(etype):
    """
    A validator that raises a :exc:`ValueError` if an element of the
    attribute value is not an instance of ``etype``.

    :param etype: type (or tuple of types) every element should have
    """
    return _ListOfValidator(etype)


def is_square_matrix(instance, attribute, value):
    """
    A validator that raises a :exc:`ValueError` if the attribute value is not
    a non-empty sequence of rows, each as long as the number of rows.
    """
    rows = len(value)
    if rows == 0 or any(len(row) != rows for row in value):
        raise ValueError(
            "{attr} should be a square matrix".format(attr=attribute.name))
