import numpy as np
from setuptools import Extension, setup

# The extension is optional: without Cython (or a compiler) the package
# falls back to boxswarm._kernels_py at import time.
try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "boxswarm._kernels",
                ["src/boxswarm/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
