'''Run examples.'''

from contextlib import redirect_stdout
import glob
import io
import json
import os

from clairautlib import _gen
from clairautlib.manifest import bundled_fixtures


def test_examples():
    '''Run manifests in ./examples directory.'''

    examples_dir = os.path.join(os.path.dirname(__file__), 'examples')
    manifests = glob.glob('{}/*.manifest.py'.format(examples_dir))
    assert len(manifests) == 1

    for example in manifests:
        stdout = io.StringIO()
        with redirect_stdout(stdout):
            ret = _gen.check_manifest([example])
            assert ret == 0
        summary = json.loads(stdout.getvalue())['summary']
        assert summary['fail'] == summary['error'] == 0


def test_bundled_fixtures():
    '''Every bundled fixture passes its own checks.'''

    for name in bundled_fixtures():
        stdout = io.StringIO()
        with redirect_stdout(stdout):
            ret = _gen.check_manifest([name, '--format', 'text'])
            assert ret == 0
        assert stdout.getvalue().startswith(name)
