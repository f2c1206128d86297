"""
A python package for scheduling the reuse of prior-processor fuzzing tests on a new processor-under-test.
"""
from setuptools import setup, find_packages

setup(
    name='testreuse',

    version='0.1.0',

    description=(
        'Test-reuse scheduling for hardware fuzzing: corpus minimization, contextual-bandit training of test ' +
        'lists, campaign runtime and a synthetic benchmark harness.'
    ),

    # Choose your license
    license='MIT',

    # See https://pypi.python.org/pypi?%3Aaction=list_classifiers
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Developers',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.6',
        'Topic :: Software Development :: Testing',
    ],

    keywords='fuzzing hardware processor coverage contextual-bandit set-cover',

    packages=find_packages(exclude=['docs', 'tests']),

    python_requires='>=3.6',

    # dependencies
    # See https://packaging.python.org/en/latest/requirements.html
    install_requires=[
        "numpy>=1.17.0"
    ],

    # pip install -e .[dev,test]
    extras_require={
        'dev': ['pytest>=2.9.0'],
        'test': ['pytest>=2.9.0'],
    },

    package_data={},

    data_files=[],

    entry_points={
        'console_scripts': ['testreuse=testreuse.cli:main'],
    }
)
