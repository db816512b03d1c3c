"""Setup of the groupseg package.

Install with ``pip install .`` (``pip install .[test]`` adds pytest).
"""

from setuptools import setup

setup(
    name="groupseg",
    version="1.0",
    description="Grouped amodal semantic segmentation on synthetic depth scenes",
    author="groupseg developers",
    license="Apache 2.0",
    packages=["groupseg"],
    python_requires=">=3.8",
    install_requires=["numpy>=1.20", "pandas", "scipy", "Pillow"],
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["groupseg=groupseg.cli:main"]},
)
