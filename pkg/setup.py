"""Build script for the optional compiled simulation kernel.

The extension is marked optional: if no C toolchain (or Cython) is
available the install still succeeds and the package falls back to the
pure-numpy engine at import time.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "sgdmlab._core._kernel",
                ["src/sgdmlab/_core/_kernel.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
