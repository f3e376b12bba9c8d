"""Build the compiled tally kernel.

The package runs without the extension (a pure-Python twin is selected at
import time), so a failed compile costs speed, not correctness.  The two
backends must produce bit-identical floats; -ffp-contract=off keeps the C
compiler from fusing multiply-adds the interpreter cannot fuse.
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "chi2_regimes._kernels._ckernels",
        ["src/chi2_regimes/_kernels/_ckernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))
