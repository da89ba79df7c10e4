import os

import numpy as np
from setuptools import Extension, setup

# The compiled kernels are optional: the package falls back to pure Python.
ext_modules = []
if os.environ.get("EIGHTPT_NO_EXT", "") in ("", "0"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension("eightpt._ckernels", ["src/eightpt/_ckernels.pyx"],
                       include_dirs=[np.get_include()],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")])],
            language_level=3,
        )

setup(ext_modules=ext_modules)
