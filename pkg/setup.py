import os

import numpy as np
from setuptools import Extension, setup

# Set TRAJALIGN_BUILD_EXT=0 to skip the compiled core entirely.
USE_CYTHON = os.environ.get("TRAJALIGN_BUILD_EXT", "1") != "0"

extensions = []
if USE_CYTHON:
    try:
        from Cython.Build import cythonize
    except ImportError:
        USE_CYTHON = False

if USE_CYTHON:
    extensions = cythonize(
        [
            Extension(
                "trajalign._ckernels",
                ["src/trajalign/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
