#!/usr/bin/env python3
from setuptools import find_packages, setup

tests_require = [
    "black",
    "deepdiff",
    "flake8",
    "pytest",
    "pytest-benchmark",
    "pytest-cov",
]

extras_require = {
    "test": tests_require,
}

setup(
    name="em-rates",
    use_scm_version=True,
    setup_requires=["setuptools_scm"],
    python_requires=">=3.8",
    description="Monte Carlo lab for strong convergence rates of the "
    "Euler-Maruyama scheme with irregular drift",
    packages=find_packages(exclude=("integration_tests",)),
    include_package_data=True,
    package_data={"emrates": ["experiments/*.yaml"]},
    install_requires=[
        "cachetools",
        "click",
        "numpy>=1.19",
        "pandas",
        "python-rapidjson",
        "ruamel.yaml",
        "scipy>=1.6",
        "structlog",
    ],
    tests_require=tests_require,
    extras_require=extras_require,
    entry_points={
        "console_scripts": [
            "emrates-lab = emrates.lab:cli",
        ]
    },
)
