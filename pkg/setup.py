from setuptools import setup, find_packages

thisversion = '2026.10.01'

setup(name="biaslattice",
      version=thisversion,
      description="Catalog-conditioned contextual adapters and shallow fusion for a desk-scale neural transducer",
      keywords=['speech recognition', 'transducer', 'contextual biasing', 'adapters'],
      zip_safe=True,
      packages=find_packages(exclude=['tests']),
      python_requires='>=3.11',
      package_data={ '': ['*.txt', '*.rst'], },
      exclude_package_data={'': ['README.rst']},
      install_requires=["numpy >=1.24", "colorama >=0.3.7", "networkx >=2.6", "psutil >=5.2.0"],
      tests_require=['coverage >=3.7.1'],
      entry_points= {
        'console_scripts': [ 'biaslattice = biaslattice.blyard:main' ],
      },
      classifiers=[
              "Programming Language :: Python :: 3 :: Only",
              "Development Status :: 4 - Beta",
              "Topic :: Scientific/Engineering",
              "Topic :: Scientific/Engineering :: Artificial Intelligence",
              "Environment :: Console",
              "Intended Audience :: Science/Research",
      ],
      long_description='''
biaslattice trains a small RNN-T transducer on synthetic pseudo-audio,
freezes it, and attaches catalog-conditioned cross-attention adapters
that bias recognition toward user-specific entities (contact names,
appliances, device locations).  A weighted word-piece trie provides
shallow fusion for comparison.  Everything runs on a laptop; every
gradient is checked against finite differences.
'''
)
