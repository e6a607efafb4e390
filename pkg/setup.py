"""
Setup script for the camera-height scale recovery toolkit.
"""

from setuptools import find_packages, setup

setup(
    name="camh-scale",
    version="1.0.0",
    description="Metric scale recovery for monocular depth from camera height and object size priors",
    packages=find_packages(exclude=["tests", "tests.*"]),
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "Pillow>=10.0.0",
        "matplotlib>=3.7",
        "SQLAlchemy>=2.0.23",
        "python-dotenv>=1.0.0",
        "tomli>=2.0.1; python_version < '3.11'",
    ],
    extras_require={
        "dev": [
            "pytest>=7.4.3",
            "pytest-cov>=4.1.0",
            "black>=23.9.1",
            "flake8>=6.1.0",
        ]
    },
    entry_points={
        "console_scripts": [
            "camh=src.app:main",
        ],
    },
)
