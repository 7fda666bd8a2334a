from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="forgefighter",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        "numpy>=1.24.3",
        "scipy>=1.10.0",
        "opencv-python>=4.5.0",
        "pillow>=10.0.1",
        "matplotlib>=3.7.3",
        "pandas>=2.0.3",
        "scikit-learn>=1.3.0",
    ],
    extras_require={
        "dev": [
            "pytest>=6.0.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "forgefighter=forgefighter.main:main",
        ],
    },
    author="ForgeFighter Team",
    description="Attack-aware forgery detection with red-team training and randomized defense",
    long_description=long_description,
    long_description_content_type="text/markdown",
    keywords="image forensics, deepfake detection, counter-forensics, robustness",
    python_requires=">=3.9",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Image Recognition",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
)
