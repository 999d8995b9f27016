from setuptools import setup, find_packages

setup(
    name="fusetrack",
    version="0.1.0",
    author="fusetrack developers",
    description="Detection-tracker fusion engine and evaluation harness for long-duration single-object tracking",
    packages=find_packages(exclude=["examples", "examples.*"]),
    python_requires=">=3.8",
    install_requires=[
        "pandas>=1.5",
        "openpyxl",
        "numpy",
        "filterpy"
    ],
    entry_points={
        "console_scripts": ["fusetrack=fusetrack.cli:main"],
    },
)
