import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# NETREC_NO_EXT=1 installs the pure-Python package only.
if os.environ.get("NETREC_NO_EXT"):
    ext_modules = []
else:
    extensions = [
        Extension(
            "netrec._core",
            ["src/netrec/_core.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
        ),
    ]
    ext_modules = cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )

setup(ext_modules=ext_modules)
