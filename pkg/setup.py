import os

from setuptools import setup

ext_modules = []
if os.environ.get("PLAP_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("plap._kernels", ["src/plap/_kernels.pyx"],
                       include_dirs=[np.get_include()])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
