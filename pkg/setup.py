"""Builds the optional compiled event engine.

Without Cython or a C compiler the package installs pure-Python and
``mess.engine`` falls back to ``mess._engine``.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("MESS_NO_EXTENSION") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("mess._kernel", ["src/mess/_kernel.pyx"],
                       include_dirs=[numpy.get_include()],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)
