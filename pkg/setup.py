import numpy as np
from setuptools import Extension, setup
from Cython.Build import cythonize

# Compiled correlation kernel. The package falls back to the NumPy
# implementation at import time if this extension is unavailable.
extensions = [
    Extension(
        "gabordefect._kernels._convext",
        ["src/gabordefect/_kernels/_convext.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
