import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("MIMOGFM_NO_EXT"):
    ext_modules = cythonize(
        [Extension("mimogfm._ckernel", ["src/mimogfm/_ckernel.pyx"],
                   include_dirs=[np.get_include()])],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
