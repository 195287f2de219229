from setuptools import setup, find_packages
import os

with open(os.path.join(os.path.dirname(__file__), 'magtrack', 'VERSION')) as version_file:
    version = version_file.read().strip()

with open('README-pypi.rst') as readme_file:
    long_description = readme_file.read()

# Calculate dependencies
dependencies = [
    'colorama',
    'numpy',
    'python-termstyle',
    'scipy',
    'simpy',
]

# Actual setup call
setup(
    name = 'magtrack',
    packages = find_packages(),
    package_data = {'magtrack' : ['VERSION', 'shell_completion.sh']},
    version = version,
    install_requires = dependencies,
    entry_points = {
        'console_scripts' : [
            'magtrack = magtrack:main',
            ],
    },
    test_suite='magtrack.test',
    description = 'Simulation and evaluation of 3D hand tracking with oscillating magnetic fields.',
    long_description = long_description,
    license = 'MIT',
    keywords = ['magnetic', 'tracking', 'hand', 'localization', 'multilateration',
        'rssi', 'coil', 'dipole', 'tdma', 'calibration', 'simulation', 'gdop',
        'wearable', 'benchmark'],
    classifiers = [
        'Development Status :: 4 - Beta',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Natural Language :: English',
        'Operating System :: MacOS :: MacOS X',
        'Operating System :: Microsoft :: Windows',
        'Operating System :: POSIX :: Linux',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering',
        'Topic :: Scientific/Engineering :: Physics',
        'Topic :: Utilities'],
)
