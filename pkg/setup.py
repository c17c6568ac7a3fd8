import json
import sys
from pathlib import Path

from setuptools import find_packages, setup

# Get the long description from the README file
ROOT_DIR = Path(__file__).parent.resolve()
long_description = (ROOT_DIR / "README.md").read_text(encoding="utf-8")
VERSION_FILE = ROOT_DIR / "federated_best_arm" / "VERSION"
VERSION = json.loads(VERSION_FILE.read_text(encoding="utf-8"))["version"]

if sys.version_info < (3, 9):
    sys.exit("federated_best_arm requires Python >= 3.9")

_ = setup(
    name="federated-best-arm",
    version=VERSION,
    description="simulator and bound calculators for federated best-arm identification",
    long_description=long_description,
    long_description_content_type="text/markdown",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Programming Language :: Python :: 3.13",
    ],
    packages=find_packages(exclude=["tests"]),
    package_data={"federated_best_arm": ["VERSION"]},
    install_requires=[
        "fire",
        "loguru",
        "numpy",
        "pandas",
        "pydantic-settings",
        "pydantic>=2.7.0",
        "rich",
        "ruyaml",
        "scipy",
        "tqdm",
        "typing-extensions",
    ],
    extras_require={
        "dev": [
            "black",
            "pdoc",
            "pre-commit",
            "pyright",
            "pytest",
        ]
    },
    entry_points={
        "console_scripts": ["fedbai = federated_best_arm.__main__:main"]
    },
)
