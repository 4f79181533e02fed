from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="dls-sil",
    version="1.0.0",
    description="Discrete-event simulator of dynamic loop scheduling with simulation-in-the-loop technique selection",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(include=["dls_sil", "dls_sil.*"]),
    classifiers=[
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Environment :: Console",
        "Topic :: Scientific/Engineering",
        "Topic :: System :: Distributed Computing",
    ],
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.22",
        "matplotlib>=3.5",
        "pydantic>=2",
    ],
    extras_require={
        "test": ["pytest", "pytest-cov"],
        "dev": ["pytest", "black", "flake8"],
    },
    entry_points={
        "console_scripts": [
            "dls-sil=dls_sil.cli:main",
        ],
    },
    keywords="loop scheduling self-scheduling simulation heterogeneous hpc",
)
