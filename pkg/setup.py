from setuptools import setup, find_packages
import entrolim

setup(
    version = entrolim.__version__,
    description = "Entropy lower bounds on L_p norms of causal feedback loop errors",
    name = "entrolim",
    packages = find_packages(exclude=['tests']),
    python_requires = '>=3.8',

    install_requires = [
        'numpy>=1.20',
        'scipy>=1.7',
        'statsmodels>=0.12',
        'scikit-learn>=0.24',
        'PyYAML>=5.1',
        ],
    extras_require = {
        'test': ['pytest'],
        },

    scripts = ['entrolim-cli.py'],
    entry_points = {
        'console_scripts': ['entrolim = entrolim.cli:main'],
        },
    )
