from setuptools import setup, find_packages

setup(
    name="contagionforge",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "examples"]),
    install_requires=[
        "python-dotenv>=0.19.0",
        "pydantic>=2.0.0",
        "pandas>=2.0.0",
        "numpy>=1.24.0",
        "scipy>=1.10.0",
        "statsmodels>=0.14.0",
        "scikit-learn>=1.3.0",
        "PyWavelets>=1.4.1",
        "networkx>=3.1",
        "python-igraph>=0.10.4",
    ],
    entry_points={
        "console_scripts": ["contagionforge=contagionforge.main:main"],
    },
    python_requires=">=3.9",
)
