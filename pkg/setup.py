from setuptools import find_packages, setup

setup(
    name="hgcnet",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    package_data={"hgcnet.netbuilder": ["presets.yaml"]},
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.22",
        "pydantic>=2.6.1",
        "pydantic-settings>=2.1.0",
        "python-dotenv>=1.0.1",
        "structlog>=23.2.0",
        "prometheus-client>=0.19.0",
        "pyyaml>=6.0.1",
    ],
    extras_require={
        "dev": [
            "pytest>=7.0.0",
            "pytest-cov>=4.0.0",
            "pytest-mock>=3.10.0",
            "pytest-timeout>=2.2.0",
            "hypothesis>=6.0.0",
            "black>=23.0.0",
            "isort>=5.12.0",
            "flake8>=6.0.0",
            "mypy>=1.0.0",
        ],
    },
    entry_points={"console_scripts": ["hgcnet=hgcnet.cli.main:main"]},
    author="HGCNet Team",
    description="Hierarchical group convolution engine, HGCNet builder and cost analyzer",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
)
