"""Builds the optional compiled user-scan kernel.

If Cython or a compiler is missing the package still installs and runs on the
numpy fallback.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("PRIO_MARKET_NO_EXT", "") in ("", "0"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext = Extension(
            "priomarket._kernels",
            ["src/priomarket/_kernels.pyx"],
            include_dirs=[numpy.get_include()],
            # no FMA contraction: results must match the numpy path bit for bit
            extra_compile_args=["-O3", "-ffp-contract=off"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize([ext], language_level=3)
    except ImportError:
        pass

setup(ext_modules=ext_modules)
