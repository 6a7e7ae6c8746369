"""Check results and their JSON and text renderings."""

import json
import math

import attr
import numpy as np
from attr.validators import instance_of, optional

from clairautlib import __version__
from clairautlib.validators import is_in


STATUSES = ('pass', 'fail', 'vacuous', 'error')
FORMATS = ('json', 'text')


class ReportEncoder(json.JSONEncoder):
    """Encode report objects.

    Finite floats are written with 17 significant digits. Non-finite floats
    become the strings "nan", "inf" and "-inf".
    """

    def default(self, obj):
        to_json_data = getattr(obj, 'to_json_data', None)
        if to_json_data:
            return to_json_data()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.generic):
            return obj.item()
        return json.JSONEncoder.default(self, obj)

    def iterencode(self, o, _one_shot=False):
        indent = self.indent
        if indent is not None and not isinstance(indent, str):
            indent = ' ' * indent
        encoder = (json.encoder.encode_basestring_ascii if self.ensure_ascii
                   else json.encoder.encode_basestring)
        markers = {} if self.check_circular else None
        iterencode = json.encoder._make_iterencode(
            markers, self.default, encoder, indent, format_float,
            self.key_separator, self.item_separator, self.sort_keys,
            self.skipkeys, _one_shot)
        return iterencode(_plain(o, self.default), 0)


def format_float(value):
    return '{:.17g}'.format(value)


def _float(value):
    if math.isnan(value):
        return 'nan'
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return value


def _plain(obj, default):
    """Resolve ``obj`` into dicts, lists, strings and finite numbers."""
    if isinstance(obj, (bool, str, int)) or obj is None:
        return obj
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v, default) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v, default) for v in obj]
    return _plain(default(obj), default)


@attr.s
class CheckResult(object):
    name = attr.ib(validator=instance_of(str))
    kind = attr.ib(validator=instance_of(str))
    status = attr.ib(validator=is_in(STATUSES))
    tolerance = attr.ib()
    expect = attr.ib(default=True, validator=instance_of(bool))
    holds = attr.ib(default=None, validator=optional(instance_of(bool)))
    residuals = attr.ib(default=attr.Factory(dict))
    artifacts = attr.ib(default=attr.Factory(dict))
    variant = attr.ib(default='')
    error = attr.ib(default=None)

    @property
    def worst_residual(self):
        values = [v for v in self.residuals.values()
                  if isinstance(v, float)]
        return max(values, default=None)

    def to_json_data(self):
        data = {
            'name': self.name,
            'type': self.kind,
            'status': self.status,
            'tolerance': self.tolerance,
            'expect': self.expect,
            'holds': self.holds,
            'residuals': self.residuals,
            'artifacts': self.artifacts,
        }
        if self.variant:
            data['variant'] = self.variant
        if self.error is not None:
            data['error'] = self.error
        return data


@attr.s
class Report(object):
    manifest = attr.ib(validator=instance_of(str))
    seed = attr.ib()
    checks = attr.ib(default=attr.Factory(list))
    elapsed = attr.ib(default=0.0)
    version = attr.ib(default=__version__)

    def count(self, status):
        return sum(1 for c in self.checks if c.status == status)

    def to_json_data(self, timings=False):
        data = {
            'manifest': self.manifest,
            'version': self.version,
            'seed': self.seed,
            'checks': self.checks,
            'summary': {status: self.count(status) for status in STATUSES},
        }
        if timings:
            data['elapsed'] = self.elapsed
        return data


def exit_code(report):
    """0 when nothing failed, 1 on a failed check, 2 on an errored one."""
    if report.count('error'):
        return 2
    if report.count('fail'):
        return 1
    return 0


def _text(report):
    rows = [('STATUS', 'CHECK', 'TYPE', 'WORST RESIDUAL')]
    for check in report.checks:
        worst = check.worst_residual
        detail = '-' if worst is None else '{:.3g}'.format(worst)
        if check.error:
            detail = check.error
        elif check.variant:
            detail += ' ({})'.format(check.variant)
        rows.append((check.status, check.name, check.kind, detail))
    widths = [max(len(row[i]) for row in rows) for i in range(3)]
    lines = ['{} (seed {}, clairautlib {})'.format(
        report.manifest, report.seed, report.version)]
    for row in rows:
        lines.append('  '.join(
            [cell.ljust(width) for cell, width in zip(row, widths)] + [row[3]]
        ).rstrip())
    lines.append('{} passed, {} failed, {} vacuous, {} errors in {:.2f}s'.format(
        report.count('pass'), report.count('fail'), report.count('vacuous'),
        report.count('error'), report.elapsed))
    return '\n'.join(lines) + '\n'


def emit_report(report, format='json', timings=False):
    """Render ``report`` as bytes.

    JSON output has sorted keys and is identical across runs unless
    ``timings`` adds the elapsed time.
    """
    if format not in FORMATS:
        raise ValueError("format should be one of {}".format(FORMATS))
    if format == 'text':
        return _text(report).encode('utf-8')
    text = json.dumps(report.to_json_data(timings=timings), sort_keys=True,
                      indent=2, cls=ReportEncoder)
    return (text + '\n').encode('utf-8')


def write_report(report, stream, format='json', timings=False):
    stream.write(emit_report(report, format, timings).decode('utf-8'))
