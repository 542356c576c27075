"""Build script for the optional compiled kernels.

The package works without compilation (a pure-numpy fallback is selected at
import time); building the extension just makes the LSTM inner loops faster.
The extension is marked optional so installation never fails on a machine
without a C toolchain.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "layermix.kernels._native",
                ["src/layermix/kernels/_native.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
    for ext in extensions:
        ext.optional = True
except ImportError:
    extensions = []

setup(ext_modules=extensions)
