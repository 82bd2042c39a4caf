from setuptools import setup, find_packages

setup(
    name="pb_chrono",
    version="0.1.0",
    description="Lead-210 chronologies: simulated cores, CRS and Bayesian age-depth models, and their comparison",
    packages=find_packages(exclude=["test", "test.*", "examples", "examples.*"]),
    package_data={"scenarios": ["data/*.csv"]},
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "pandas>=2.0",
        "arviz>=0.16,<1.0",
        "joblib>=1.3",
        "tqdm>=4.66",
        "click>=8.1",
    ],
    entry_points={
        "console_scripts": ["pb-chrono=src.cli.commands:run"],
    },
)
