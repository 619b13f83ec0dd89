#!/usr/bin/env python
# -*- coding: utf-8 -*-
from setuptools import find_packages, setup

from ghost_radius import __version__


REQUIREMENTS = [
    'numpy>=1.20',
    'scipy>=1.6',
]


CLASSIFIERS = [
    'Development Status :: 4 - Beta',
    'Environment :: Console',
    'Intended Audience :: Science/Research',
    'Intended Audience :: Developers',
    'License :: OSI Approved :: BSD License',
    'Operating System :: OS Independent',
    'Programming Language :: Python',
    'Programming Language :: Python :: 3',
    'Programming Language :: Python :: 3.8',
    'Programming Language :: Python :: 3.9',
    'Programming Language :: Python :: 3.10',
    'Programming Language :: Python :: 3.11',
    'Topic :: Scientific/Engineering',
    'Topic :: Scientific/Engineering :: Artificial Intelligence',
    'Topic :: Scientific/Engineering :: Mathematics',
]


setup(
    name='ghost-radius',
    version=__version__,
    license='BSD',
    description='Taylor convergence radius of softmax cross-entropy along update directions',
    long_description=open('README.rst').read(),
    packages=find_packages(exclude=['tests']),
    include_package_data=True,
    zip_safe=False,
    python_requires='>=3.8',
    install_requires=REQUIREMENTS,
    classifiers=CLASSIFIERS,
    entry_points={
        'console_scripts': [
            'ghost = ghost_radius.harness.cli:main',
        ],
    },
    test_suite='tests.settings.test',
)
