from setuptools import setup, find_packages

setup(
    name="specrec",
    version="1.0.0",
    description="Low-altitude ISAC feature spectrum synthesis, jamming and diffusion-based recovery",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        "click==8.1.7",
        "rich==13.7.0",
        "pyyaml==6.0.1",
        "python-dotenv==1.0.0",
        "markdown2==2.4.10",
        "numpy==1.26.2",
        "pandas==2.1.3",
        "scipy==1.11.4",
        "scikit-image==0.22.0",
        "matplotlib==3.8.2",
        "torch==2.1.2",
    ],
    extras_require={
        "test": [
            "pytest==7.4.3",
            "pytest-cov==4.1.0",
            "hypothesis==6.92.1",
        ],
    },
    entry_points={
        'console_scripts': [
            'specrec=src.cli:cli',
        ],
    },
    python_requires='>=3.9',
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
    ],
)
