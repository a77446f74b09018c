import codecs
import os

from setuptools import find_packages, setup

here = os.path.abspath(os.path.dirname(__file__))

with codecs.open(os.path.join(here, "README.md"), encoding="utf-8") as fh:
    long_description = "\n" + fh.read()

DESCRIPTION = "Asynchronous federated AdaBoost simulator"
LONG_DESCRIPTION = (
    "Adaptive synchronization intervals, staleness-decayed learner weights and buffered uploads for federated "
    "AdaBoost, benchmarked in a deterministic discrete-event simulator against a synchronous baseline"
)

# Setting up
setup(
    name="fedboost",
    version="0.1.0",
    description=DESCRIPTION,
    long_description_content_type="text/markdown",
    long_description=long_description,
    packages=find_packages(exclude=["tests", "tests.*"]),
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24",
        "pandas~=2.2",
        "PyYAML~=6.0",
        "structlog~=22.3",
        "pydantic~=1.10",
    ],
    entry_points={"console_scripts": ["fedboost=fedboost.cli:main"]},
    keywords=["python", "federated learning", "adaboost", "asynchronous", "simulation"],
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3",
        "Operating System :: Unix",
        "Operating System :: MacOS :: MacOS X",
        "Operating System :: Microsoft :: Windows",
    ],
)
