# -------------------------------------------------------------------------
# relact: relation-transition action recognition.
#
# Local setup configuration.
# Run
#      pip3 install .
#
# to install.
#
# License: MIT
#
# Website: https://github.com/relact/relact
# -------------------------------------------------------------------------

import os
from setuptools import setup, find_packages

import sys
if sys.version_info < (3,8):
    print('relact requires Python 3.8 or newer.')
    sys.exit(1)

from relact.version import __version__

here = os.path.abspath(os.path.dirname(__file__))
with open(os.path.join(here, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

setup(
    name = 'relact',
    version = __version__,
    description = ('Interpretable video action recognition from '
                   'human-object relation transitions.'),
    license = 'MIT',
    keywords = 'action recognition scene graph transformer interpretability',
    url = 'https://github.com/relact/relact',
    packages=find_packages(exclude=['tests']),
    long_description=long_description,
    long_description_content_type='text/markdown',
    classifiers=[
        'Development Status :: 4 - Beta',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Natural Language :: English',
        'Operating System :: OS Independent',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
        'Topic :: Utilities',
    ],
    install_requires=[
        'numpy',
        'torch >= 1.13',
        'scikit-learn',
        'matplotlib',
        'pyyaml',
    ],
    entry_points = {
        'console_scripts': [
            'relact=relact.main:main'
        ],
    },
    extras_require={
        'test': ['pytest'],
    }
)
