"""Build script for the compiled kernel extension.

The package works without the extension (a pure numpy/Python twin is
selected at import time), but the compiled core is what makes the
large experiment sweeps practical.
"""
import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# -ffp-contract=off keeps the C arithmetic bit-identical to the Python
# fallback (no FMA fusion), which the kernel equivalence tests rely on.
ext = Extension(
    "ehopt._kernels._speedups",
    ["src/ehopt/_kernels/_speedups.pyx"],
    include_dirs=[numpy.get_include()],
    extra_compile_args=["-O3", "-ffp-contract=off"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(ext_modules=cythonize([ext], language_level=3))
