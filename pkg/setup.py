"""Build script for the optional compiled kernel extension.

The package works without the extension (pure-Python kernels are selected at
import time); building it just makes the interpreter hot path faster.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("gridsynth._kernels_cy", ["src/gridsynth/_kernels_cy.pyx"])],
        language_level="3",
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
