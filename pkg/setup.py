import os
from setuptools import setup, find_packages


def local_file(name):
    return os.path.relpath(os.path.join(os.path.dirname(__file__), name))


README = local_file('README.rst')


setup(
    name='clairautlib',

    # Versions should comply with PEP440.  For a discussion on single-sourcing
    # the version across setup.py and the project code, see
    # https://packaging.python.org/en/latest/guides/single-sourcing-package-version/
    version='0.1.0',
    description='Numerical checks for Clairaut Riemannian maps to almost-contact manifolds',
    long_description=open(README).read(),
    license='Apache',
    packages=find_packages(),
    package_data={
        'clairautlib': ['fixtures/*.json'],
    },
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: Apache Software License',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
    install_requires=[
        'attrs>=20.1.0',
        'numpy>=1.17',
    ],
    extras_require={
        'dev': [
            'flake8',
            'hypothesis',
            'pytest',
        ],
    },
    entry_points={
        'console_scripts': [
            'clairaut-check=clairautlib._gen:check_manifest_script',
            'clairaut-validate=clairautlib._gen:validate_manifests_script',
            'clairaut-geodesic=clairautlib._gen:dump_geodesic_script',
        ],
    },
)
