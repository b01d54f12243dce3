"""Builds the optional compiled kernel extension.

The package works without it: erproute.kernels falls back to the NumPy
implementations when the extension is missing or fails to import.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "erproute._kernels_cy",
                ["src/erproute/_kernels_cy.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=extensions)
