"""Build the optional compiled kernel.

Without Cython or a C compiler the package installs in pure-Python mode and
``dampscat.kernels`` falls back to ``_kernel_py``.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("DAMPSCAT_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("dampscat._kernel_c", ["src/dampscat/_kernel_c.pyx"],
                       include_dirs=[numpy.get_include()],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": 3},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
