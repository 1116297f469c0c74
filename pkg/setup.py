"""Build script with an optional compiled kernel.

The package is fully functional without the extension; ``netsprt.kernels``
falls back to vectorized numpy implementations when the compiled module is
missing. Building requires Cython, numpy headers and a C compiler - if any of
them is unavailable the extension is skipped silently.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("NETSPRT_SKIP_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "netsprt._kernels_c",
                    ["src/netsprt/_kernels_c.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
