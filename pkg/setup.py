"""
Setup script for rayforge.
"""

from setuptools import setup, find_packages

TEST_TOOLS = ("pytest", "hypothesis")

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

with open("requirements.txt", "r", encoding="utf-8") as fh:
    pinned = [line.strip() for line in fh if line.strip() and not line.startswith("#")]

runtime = [req for req in pinned if not req.startswith(TEST_TOOLS)]
testing = [req for req in pinned if req.startswith(TEST_TOOLS)]

setup(
    name="rayforge",
    version="1.0.0",
    description="Magnetic X-ray and light ray transforms with matrix weights on 2D domains",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=("tests", "tests.*")),
    classifiers=[
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    python_requires=">=3.9",
    install_requires=runtime,
    extras_require={"test": testing},
    entry_points={
        "console_scripts": ["rayforge=rayforge.cli:cli"],
    },
    package_data={"rayforge": ["scenes/*.ini"]},
)
