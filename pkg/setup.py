"""Build hook for the optional GMP-backed kernel extension.

The extension is marked optional: if Cython or libgmp is missing the build
still succeeds and ``mab.arith`` falls back to the pure-Python kernels.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("MAB_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "mab._kernels",
                    ["src/mab/_kernels.pyx"],
                    libraries=["gmp"],
                    optional=True,
                )
            ],
            compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
        )

setup(ext_modules=ext_modules)
