"""Build script. The Cython kernel extension is optional: if Cython or a C
compiler is unavailable the package installs anyway and falls back to the
NumPy kernels at import time."""

from setuptools import setup

import os

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    flags = ["-O3"]
    if os.environ.get("BIOATTN_PORTABLE", "") != "1":
        flags.append("-march=native")
    ext_modules = cythonize(
        [
            Extension(
                "bioattn.kernels._conv_cy",
                ["src/bioattn/kernels/_conv_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=flags,
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
