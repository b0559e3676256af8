"""Build script for the optional compiled kernel extension.

The package is pure Python plus one Cython extension holding the hot
kernels (connection solve, environment RK4 step). If Cython or a C
compiler is unavailable, set SWIMGAIT_NO_EXT=1 (or let the build fail
over) and the package falls back to the numpy implementation at import
time.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SWIMGAIT_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "swimgait._kernels._core",
                    ["src/swimgait/_kernels/_core.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
