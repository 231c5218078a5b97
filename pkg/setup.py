import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("GRADOPT_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        npyrandom_dir = os.path.join(os.path.dirname(np.random.__file__), "lib")
        ext_modules = cythonize(
            [
                Extension(
                    "gradopt._kernels",
                    ["src/gradopt/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    library_dirs=[npyrandom_dir],
                    libraries=["npyrandom"],
                    # -ffp-contract=off keeps float arithmetic bit-identical
                    # to the pure-Python loop (no FMA contraction).
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
